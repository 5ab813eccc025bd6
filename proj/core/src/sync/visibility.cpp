// SPDX-License-Identifier: Apache-2.0
#include "vlab/sync/visibility.hpp"

#include <algorithm>

namespace vlab {

const GameState *visible_game(const EngineState &state, const PlayerId &viewer)
{
    auto p = state.players.find(viewer);
    if (p == state.players.end() || !p->second.current_game)
        return nullptr;
    auto g = state.games.find(*p->second.current_game);
    if (g == state.games.end() || g->second.status == GameStatus::pending)
        return nullptr;
    auto &game = g->second;
    if (!game.is_member(viewer) || game.removed.count(viewer))
        return nullptr;
    return &game;
}

namespace {

bool owner_sees(const EngineState &state, const PlayerId &owner, const ScopeRef &scope)
{
    if (scope.kind() == ScopeKind::player)
        return state.players.count(owner) > 0;
    auto *game = visible_game(state, owner);
    return game && scope.game_id() == game->id;
}

} // namespace

bool can_see(const EngineState &state, const PlayerId &viewer, const ScopeRef &scope, const std::string &key)
{
    switch (scope.kind()) {
    case ScopeKind::game:
    case ScopeKind::round:
    case ScopeKind::stage: {
        auto *game = visible_game(state, viewer);
        return game && scope.game_id() == game->id;
    }
    case ScopeKind::player:
    case ScopeKind::player_round:
    case ScopeKind::player_stage: {
        auto owner = *scope.player_id();
        if (owner == viewer)
            return owner_sees(state, owner, scope);
        auto *game = visible_game(state, viewer);
        if (!game || !game->public_keys.count(key) || !game->is_member(owner))
            return false;
        return scope.kind() == ScopeKind::player || scope.game_id() == game->id;
    }
    }
    return false;
}

std::vector<PlayerId> audience(const EngineState &state, const ScopeRef &scope, const std::string &key)
{
    std::vector<PlayerId> out;
    auto add_game = [&](const GameId &id) {
        auto g = state.games.find(id);
        if (g == state.games.end())
            return;
        for (auto &p : g->second.players)
            if (can_see(state, p, scope, key))
                out.push_back(p);
    };
    if (scope.kind() == ScopeKind::player) {
        auto owner = *scope.player_id();
        if (can_see(state, owner, scope, key))
            out.push_back(owner);
        auto p = state.players.find(owner);
        if (p != state.players.end() && p->second.current_game) {
            auto g = state.games.find(*p->second.current_game);
            if (g != state.games.end())
                for (auto &mate : g->second.players)
                    if (mate != owner && can_see(state, mate, scope, key))
                        out.push_back(mate);
        }
    } else {
        add_game(*scope.game_id());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace vlab
