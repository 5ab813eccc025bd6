// SPDX-License-Identifier: Apache-2.0
#include "vlab/model/entities.hpp"

#include "vlab/common/error.hpp"

#include <algorithm>

namespace vlab {

std::string_view to_string(Phase phase) noexcept
{
    switch (phase) {
    case Phase::consent: return "consent";
    case Phase::intro: return "intro";
    case Phase::lobby: return "lobby";
    case Phase::game: return "game";
    case Phase::outro: return "outro";
    case Phase::exited: return "exited";
    }
    return "unknown";
}

std::string_view to_string(PlayerStatus status) noexcept
{
    switch (status) {
    case PlayerStatus::new_player: return "new";
    case PlayerStatus::intro: return "intro";
    case PlayerStatus::lobby: return "lobby";
    case PlayerStatus::playing: return "playing";
    case PlayerStatus::exited: return "exited";
    case PlayerStatus::dropped: return "dropped";
    }
    return "unknown";
}

std::string_view to_string(GameStatus status) noexcept
{
    switch (status) {
    case GameStatus::pending: return "pending";
    case GameStatus::running: return "running";
    case GameStatus::paused: return "paused";
    case GameStatus::ended: return "ended";
    case GameStatus::cancelled: return "cancelled";
    }
    return "unknown";
}

Phase parse_phase(std::string_view text)
{
    for (auto p : {Phase::consent, Phase::intro, Phase::lobby, Phase::game, Phase::outro, Phase::exited})
        if (to_string(p) == text)
            return p;
    fail(Errc::invalid_argument, "unknown phase '" + std::string(text) + "'");
}

PlayerStatus parse_player_status(std::string_view text)
{
    for (auto s : {PlayerStatus::new_player, PlayerStatus::intro, PlayerStatus::lobby, PlayerStatus::playing,
                   PlayerStatus::exited, PlayerStatus::dropped})
        if (to_string(s) == text)
            return s;
    fail(Errc::invalid_argument, "unknown player status '" + std::string(text) + "'");
}

GameStatus parse_game_status(std::string_view text)
{
    for (auto s : {GameStatus::pending, GameStatus::running, GameStatus::paused, GameStatus::ended,
                   GameStatus::cancelled})
        if (to_string(s) == text)
            return s;
    fail(Errc::invalid_argument, "unknown game status '" + std::string(text) + "'");
}

bool Cursor::precedes(const Cursor &other) const noexcept
{
    if (position != other.position)
        return position < other.position;
    if (position != Position::active)
        return false;
    if (round != other.round)
        return round < other.round;
    return stage < other.stage;
}

std::vector<PlayerId> GameState::active_players() const
{
    std::vector<PlayerId> out;
    for (auto &p : players)
        if (!removed.contains(p))
            out.push_back(p);
    return out;
}

bool GameState::is_member(const PlayerId &player) const
{
    return std::find(players.begin(), players.end(), player) != players.end();
}

const StageState *GameState::current_stage() const
{
    if (cursor.position != Cursor::Position::active || cursor.round >= rounds.size())
        return nullptr;
    auto &round = rounds[cursor.round];
    if (cursor.stage >= round.stages.size())
        return nullptr;
    return &round.stages[cursor.stage];
}

const RoundState *GameState::find_round(const RoundId &id) const
{
    for (auto &r : rounds)
        if (r.id == id)
            return &r;
    return nullptr;
}

const StageState *GameState::find_stage(const StageId &id) const
{
    for (auto &r : rounds)
        for (auto &s : r.stages)
            if (s.id == id)
                return &s;
    return nullptr;
}

Value to_value(const Cursor &cursor)
{
    switch (cursor.position) {
    case Cursor::Position::pre_start: return "pre_start";
    case Cursor::Position::ended: return "ended";
    case Cursor::Position::active: break;
    }
    return Value{{"round", cursor.round}, {"stage", cursor.stage}};
}

Cursor cursor_from_value(const Value &value)
{
    if (value.is_string()) {
        if (value == "pre_start")
            return {};
        if (value == "ended")
            return Cursor::ended();
        fail(Errc::invalid_argument, "bad cursor " + value.dump());
    }
    return Cursor::at(value.at("round").get<std::size_t>(), value.at("stage").get<std::size_t>());
}

namespace {

template <typename T>
Value optional_value(const std::optional<T> &v)
{
    if (!v)
        return nullptr;
    if constexpr (requires { v->str(); })
        return v->str();
    else
        return *v;
}

} // namespace

Value to_value(const PlayerState &player)
{
    return Value{
        {"id", player.id.str()},
        {"identifier", player.identifier},
        {"token_hash", player.token_hash},
        {"phase", to_string(player.phase)},
        {"intro_step", player.intro_step},
        {"status", to_string(player.status)},
        {"current_game", optional_value(player.current_game)},
        {"batch", optional_value(player.batch)},
        {"reason", optional_value(player.reason)},
        {"lobby_since", optional_value(player.lobby_since)},
    };
}

Value to_value(const GameState &game)
{
    Value rounds = Value::array();
    for (auto &r : game.rounds) {
        Value stages = Value::array();
        for (auto &s : r.stages) {
            Value submitted = Value::array();
            for (auto &p : s.submitted)
                submitted.push_back(p.str());
            stages.push_back(Value{
                {"index", s.index},
                {"id", s.id.str()},
                {"name", s.name},
                {"duration", optional_value(s.duration_s)},
                {"advance_on_submit", s.advance_on_submit},
                {"submitted", submitted},
                {"started_at", optional_value(s.started_at)},
                {"deadline", optional_value(s.deadline)},
                {"end_reason", optional_value(s.end_reason)},
            });
        }
        rounds.push_back(Value{{"index", r.index}, {"id", r.id.str()}, {"stages", stages}});
    }
    Value players = Value::array();
    for (auto &p : game.players)
        players.push_back(p.str());
    Value removed = Value::array();
    for (auto &p : game.removed)
        removed.push_back(p.str());
    return Value{
        {"id", game.id.str()},
        {"batch", game.batch.str()},
        {"treatment", to_value(game.treatment)},
        {"players", players},
        {"removed", removed},
        {"rounds", rounds},
        {"cursor", to_value(game.cursor)},
        {"status", to_string(game.status)},
        {"public_keys", game.public_keys},
        {"paused_remaining_ms", optional_value(game.paused_remaining_ms)},
        {"end_reason", optional_value(game.end_reason)},
    };
}

} // namespace vlab
