// SPDX-License-Identifier: Apache-2.0
#include "vlab/lifecycle/engine.hpp"

#include "game_runtime.hpp"
#include "vlab/common/error.hpp"

#include <algorithm>

namespace vlab {

namespace {

Value optional_json(const std::optional<std::string> &v)
{
    return v ? Value(*v) : Value(nullptr);
}

template <typename IdT>
Value optional_id(const std::optional<IdT> &v)
{
    return v ? Value(v->str()) : Value(nullptr);
}

bool numeric_id_less(const std::string &a, const std::string &b)
{
    return a.size() != b.size() ? a.size() < b.size() : a < b;
}

} // namespace

std::optional<SubmitStep> parse_submit_step(std::string_view text) noexcept
{
    if (text == "consent")
        return SubmitStep::consent;
    if (text == "intro")
        return SubmitStep::intro;
    if (text == "stage")
        return SubmitStep::stage;
    if (text == "survey")
        return SubmitStep::survey;
    return std::nullopt;
}

Engine::Engine(Scheduler &scheduler, Journal &journal, Experiment experiment, std::unique_ptr<TokenSource> tokens,
               EngineOptions options)
    : scheduler_(scheduler), journal_(journal), experiment_(std::move(experiment)), tokens_(std::move(tokens)),
      options_(options), store_(journal, this), control_(scheduler.make_strand("control"))
{
    validate_experiment(experiment_);
    if (!tokens_)
        tokens_ = std::make_unique<SecureTokenSource>();
}

Engine::~Engine() = default;

void Engine::ensure_intake() const
{
    if (journal_.halted())
        fail(Errc::journal_failure, "journal storage failed; intake halted");
}

std::vector<BatchId> Engine::ordered_batches() const
{
    std::vector<BatchId> ids;
    with_state([&](const EngineState &s) {
        for (auto &[id, b] : s.batches)
            ids.push_back(id);
        return 0;
    });
    std::sort(ids.begin(), ids.end(), [](auto &a, auto &b) { return numeric_id_less(a.str(), b.str()); });
    return ids;
}

// ---- runtimes --------------------------------------------------------------

Engine::GameRuntime &Engine::runtime(const GameId &game)
{
    std::lock_guard lock(runtimes_mutex_);
    auto &slot = runtimes_[game];
    if (!slot) {
        if (!with_state([&](const EngineState &s) { return s.games.count(game) > 0; }))
            fail(Errc::not_found, "unknown game " + game.str());
        slot = std::make_unique<GameRuntime>(*this, game, scheduler_.make_strand("game:" + game.str()));
    }
    return *slot;
}

Engine::GameRuntime *Engine::find_runtime(const GameId &game)
{
    std::lock_guard lock(runtimes_mutex_);
    auto it = runtimes_.find(game);
    return it == runtimes_.end() ? nullptr : it->second.get();
}

std::shared_ptr<Strand> Engine::game_strand(const GameId &game)
{
    return runtime(game).strand();
}

std::shared_ptr<Strand> Engine::route(const PlayerId &player) const
{
    auto game = with_state([&](const EngineState &s) -> std::optional<GameId> {
        auto it = s.players.find(player);
        if (it == s.players.end() || it->second.phase != Phase::game || !it->second.current_game)
            return std::nullopt;
        auto g = s.games.find(*it->second.current_game);
        if (g == s.games.end() || is_terminal(g->second.status))
            return std::nullopt;
        return g->first;
    });
    if (!game)
        return control_;
    return const_cast<Engine *>(this)->runtime(*game).strand();
}

// ---- reads -----------------------------------------------------------------

std::optional<PlayerState> Engine::player(const PlayerId &player) const
{
    return with_state([&](const EngineState &s) -> std::optional<PlayerState> {
        auto it = s.players.find(player);
        if (it == s.players.end())
            return std::nullopt;
        return it->second;
    });
}

std::optional<GameState> Engine::game(const GameId &game) const
{
    return with_state([&](const EngineState &s) -> std::optional<GameState> {
        auto it = s.games.find(game);
        if (it == s.games.end())
            return std::nullopt;
        return it->second;
    });
}

std::optional<BatchState> Engine::batch(const BatchId &batch) const
{
    return with_state([&](const EngineState &s) -> std::optional<BatchState> {
        auto it = s.batches.find(batch);
        if (it == s.batches.end())
            return std::nullopt;
        return it->second;
    });
}

EngineState Engine::snapshot() const
{
    // Attribute shards lock before the journal, so read them outside and retry
    // until no commit slipped in between.
    while (true) {
        auto before = journal_.next_offset();
        auto attributes = store_.all();
        auto logs = store_.logs();
        auto [state, offset] = journal_.read_consistent([&](std::uint64_t next) {
            std::shared_lock lock(state_mutex_);
            return std::pair{state_, next};
        });
        if (offset != before)
            continue;
        state.attributes = std::move(attributes);
        state.logs = std::move(logs);
        state.next_offset = offset;
        return state;
    }
}

LobbyStatus Engine::lobby_status_for(const PlayerId &player) const
{
    auto t = now();
    return with_state([&](const EngineState &s) {
        auto it = s.players.find(player);
        if (it == s.players.end() || it->second.phase != Phase::lobby)
            return LobbyStatus{};
        for (auto &[id, batch] : s.batches) {
            if (batch.status != BatchStatus::running)
                continue;
            for (auto &slot : batch.slots) {
                if (!slot.open || std::find(slot.members.begin(), slot.members.end(), player) == slot.members.end())
                    continue;
                LobbyInstance lobby{slot.capacity, slot.members.size(), batch.lobby, slot.opened_at, slot.deadline,
                                    slot.extensions};
                return lobby_status(lobby, t, it->second.lobby_since);
            }
        }
        LobbyStatus waiting;
        if (it->second.lobby_since)
            waiting.waiting_ms = std::max<TimeMs>(0, t - *it->second.lobby_since);
        return waiting;
    });
}

ScopeRef Engine::resolve_composite(const PlayerId &player, const std::string &round_or_stage) const
{
    return with_state([&](const EngineState &s) {
        auto game_id = game_of(round_or_stage);
        auto g = s.games.find(game_id);
        if (g == s.games.end())
            fail(Errc::scope_not_found, "unknown game for " + round_or_stage);
        auto &game = g->second;
        if (!game.is_member(player))
            fail(Errc::scope_not_found, "player " + player.str() + " is not in game " + game_id.str());
        if (game.find_stage(StageId(round_or_stage)))
            return ScopeRef::player_stage(StageId(round_or_stage), player);
        if (game.find_round(RoundId(round_or_stage)))
            return ScopeRef::player_round(RoundId(round_or_stage), player);
        fail(Errc::scope_not_found, "no round or stage " + round_or_stage);
    });
}

void Engine::check_readable(const ScopeRef &scope) const
{
    with_state([&](const EngineState &s) {
        if (scope.kind() == ScopeKind::player) {
            if (!s.players.count(PlayerId(scope.primary())))
                fail(Errc::scope_not_found, "unknown player " + scope.primary());
            return 0;
        }
        auto g = s.games.find(*scope.game_id());
        if (g == s.games.end())
            fail(Errc::scope_not_found, "unknown game " + scope.game_id()->str());
        auto &game = g->second;
        switch (scope.kind()) {
        case ScopeKind::round:
        case ScopeKind::player_round:
            if (!game.find_round(RoundId(scope.primary())))
                fail(Errc::scope_not_found, "unknown round " + scope.primary());
            break;
        case ScopeKind::stage:
        case ScopeKind::player_stage:
            if (!game.find_stage(StageId(scope.primary())))
                fail(Errc::scope_not_found, "unknown stage " + scope.primary());
            break;
        default:
            break;
        }
        if (scope.composite() && !game.is_member(PlayerId(*scope.secondary())))
            fail(Errc::scope_not_found, "player " + *scope.secondary() + " is not in game " + game.id.str());
        return 0;
    });
}

void Engine::check_writable(const ScopeRef &scope) const
{
    check_readable(scope);
    if (auto g = scope.game_id()) {
        bool closed = with_state([&](const EngineState &s) { return is_terminal(s.games.at(*g).status); });
        if (closed)
            fail(Errc::game_closed, "game " + g->str() + " has ended");
    }
}

// ---- flow ------------------------------------------------------------------

PlayerState Engine::transition(const PlayerId &player, FlowEvent event, std::optional<std::string> reason,
                               std::optional<GameId> game, std::optional<BatchId> batch)
{
    PlayerState next;
    {
        std::lock_guard flow_lock(flow_mutex_);
        auto current = this->player(player);
        if (!current)
            fail(Errc::not_found, "unknown player " + player.str());
        auto flow = advance_flow({current->phase, current->intro_step}, event, experiment_.intro_steps);
        next = *current;
        next.phase = flow.phase;
        next.intro_step = flow.intro_step;
        next.status = event == FlowEvent::drop ? PlayerStatus::dropped : status_for(flow.phase);
        bool keeps = event == FlowEvent::game_over || event == FlowEvent::survey_done || event == FlowEvent::drop;
        next.current_game = game ? game : (keeps ? current->current_game : std::nullopt);
        next.batch = batch ? batch : (keeps ? current->batch : std::nullopt);
        if (reason)
            next.reason = reason;
        else if (event != FlowEvent::survey_done)
            next.reason.reset();
        if (next.phase == Phase::lobby)
            next.lobby_since = current->phase == Phase::lobby ? current->lobby_since : std::optional<TimeMs>(now());
        else
            next.lobby_since.reset();

        Value body{
            {"player", player.str()},
            {"event", to_string(event)},
            {"from", to_string(current->phase)},
            {"to", to_string(next.phase)},
            {"status", to_string(next.status)},
            {"intro_step", next.intro_step},
            {"reason", optional_json(next.reason)},
            {"game", optional_id(next.current_game)},
            {"batch", optional_id(next.batch)},
            {"lobby_since", next.lobby_since ? Value(*next.lobby_since) : Value(nullptr)},
        };
        commit(EventKind::flow_transition, std::move(body), [&](EngineState &s) {
            s.players[player] = next;
            if (next.phase != Phase::lobby)
                std::erase(s.waitlist, player);
        });
    }
    if (listener_)
        listener_->on_player_update(player);
    return next;
}

void Engine::drop_player(const PlayerId &player, const std::string &reason)
{
    transition(player, FlowEvent::drop, reason);
}

// ---- sessions --------------------------------------------------------------

HelloResult Engine::hello(const std::optional<std::string> &token, const std::optional<std::string> &identifier)
{
    ensure_intake();
    if (token && !token->empty()) {
        auto it = by_token_hash_.find(sha256_hex(*token));
        if (it == by_token_hash_.end())
            fail(Errc::auth_failed, "unknown session token");
        auto state = player(it->second);
        if (identifier && !identifier->empty() && state->identifier != *identifier)
            fail(Errc::auth_failed, "token does not belong to this identifier");
        return HelloResult{it->second, {}, false, true};
    }
    if (!identifier || identifier->empty())
        fail(Errc::invalid_argument, "hello needs a session token or an identifier");
    if (identifier->size() > 256)
        fail(Errc::invalid_argument, "identifier too long");

    auto secret = tokens_->next_token();
    auto hash = sha256_hex(secret);
    auto existing = with_state([&](const EngineState &s) -> std::optional<PlayerState> {
        auto it = s.by_identifier.find(*identifier);
        if (it == s.by_identifier.end())
            return std::nullopt;
        return s.players.at(it->second);
    });
    if (existing) {
        commit(EventKind::connection_event,
               Value{{"event", "token_rotated"}, {"player", existing->id.str()}, {"token_hash", hash}},
               [&](EngineState &s) { s.players.at(existing->id).token_hash = hash; });
        by_token_hash_.erase(existing->token_hash);
        by_token_hash_[hash] = existing->id;
        return HelloResult{existing->id, secret, false, true};
    }

    auto id = with_state([](const EngineState &s) { return PlayerId("p" + std::to_string(s.players.size() + 1)); });
    commit(EventKind::connection_event,
           Value{{"event", "player_created"}, {"player", id.str()}, {"identifier", *identifier}, {"token_hash", hash}},
           [&](EngineState &s) {
               PlayerState p;
               p.id = id;
               p.identifier = *identifier;
               p.token_hash = hash;
               s.by_identifier[*identifier] = id;
               s.players[id] = std::move(p);
           });
    by_token_hash_[hash] = id;
    return HelloResult{id, secret, true, false};
}

void Engine::record_connection(const PlayerId &player, std::string_view event)
{
    commit(EventKind::connection_event, Value{{"event", event}, {"player", player.str()}}, [](EngineState &) {});
}

void Engine::player_online(const PlayerId &player)
{
    auto &presence = presence_[player];
    presence.online = true;
    ++presence.generation;
    if (presence.grace_timer) {
        control_->cancel(*presence.grace_timer);
        presence.grace_timer.reset();
    }
    auto state = this->player(player);
    if (!state)
        return;
    if (state->phase == Phase::game && state->current_game) {
        auto &rt = runtime(*state->current_game);
        rt.strand()->post([&rt, player] { rt.reconnect(player); });
    } else if (state->phase == Phase::lobby) {
        bool seated = with_state([&](const EngineState &s) {
            for (auto &[id, b] : s.batches)
                for (auto &slot : b.slots)
                    if (std::find(slot.members.begin(), slot.members.end(), player) != slot.members.end())
                        return true;
            return std::find(s.waitlist.begin(), s.waitlist.end(), player) != s.waitlist.end();
        });
        if (!seated)
            enter_lobby(player);
    }
}

void Engine::player_offline(const PlayerId &player)
{
    auto &presence = presence_[player];
    presence.online = false;
    auto generation = ++presence.generation;
    if (presence.grace_timer)
        control_->cancel(*presence.grace_timer);
    auto at = now() + TimeMs(experiment_.disconnect.grace_s) * 1000;
    presence.grace_timer = control_->post_at(at, [this, player, generation] { grace_expired(player, generation); });
}

void Engine::grace_expired(const PlayerId &player, std::uint64_t generation)
{
    auto &presence = presence_[player];
    if (presence.online || presence.generation != generation)
        return;
    presence.grace_timer.reset();
    auto state = this->player(player);
    if (!state)
        return;
    if (state->phase == Phase::lobby) {
        unseat(player);
    } else if (state->phase == Phase::game && state->current_game) {
        auto &rt = runtime(*state->current_game);
        rt.strand()->post([&rt, player] { rt.disconnect(player); });
    }
}

// ---- client intents ----------------------------------------------------------

void Engine::client_write(const PlayerId &player, const ScopeRef &scope, const std::string &key, ChangeOp op,
                          Value value, Completion done)
{
    std::shared_ptr<Strand> target;
    std::optional<GameId> game;
    try {
        ensure_intake();
        if (key.empty())
            fail(Errc::invalid_argument, "attribute key must be non-empty");
        if (auto g = scope.game_id()) {
            if (!with_state([&](const EngineState &s) { return s.games.count(*g) > 0; }))
                fail(Errc::scope_not_found, "unknown game " + g->str());
            game = g;
            target = runtime(*g).strand();
        } else {
            if (scope.primary() != player.str())
                fail(Errc::forbidden, "players may only write their own player scope");
            target = route(player);
            if (target != control_)
                game = player_state_game(player);
        }
    } catch (...) {
        done(std::current_exception());
        return;
    }
    target->post([this, player, scope, key, op, value = std::move(value), done = std::move(done), game]() mutable {
        try {
            if (game) {
                runtime(*game).client_write(player, scope, key, op, std::move(value));
            } else {
                auto state = this->player(player);
                if (!state)
                    fail(Errc::not_found, "unknown player " + player.str());
                if (state->phase == Phase::game)
                    fail(Errc::conflict, "player moved into a game; retry");
                auto change = op == ChangeOp::set ? store_.set(scope, key, std::move(value), player.str(), now())
                                                  : store_.append(scope, key, std::move(value), player.str(), now());
                if (listener_)
                    listener_->on_change(change);
            }
            done(nullptr);
        } catch (...) {
            done(std::current_exception());
        }
    });
}

std::optional<GameId> Engine::player_state_game(const PlayerId &player) const
{
    auto state = this->player(player);
    return state ? state->current_game : std::nullopt;
}

void Engine::client_submit(const PlayerId &player, SubmitRequest request, Completion done)
{
    if (request.step != SubmitStep::stage) {
        control_->post([this, player, request, done = std::move(done)] {
            try {
                control_submit(player, request);
                done(nullptr);
            } catch (...) {
                done(std::current_exception());
            }
        });
        return;
    }
    std::shared_ptr<Strand> target;
    std::optional<GameId> game;
    try {
        ensure_intake();
        if (!request.stage)
            fail(Errc::invalid_argument, "stage submission needs a stage id");
        auto state = this->player(player);
        if (!state || state->phase != Phase::game || !state->current_game)
            fail(Errc::flow_violation, "player is not in a game");
        game = state->current_game;
        target = runtime(*game).strand();
    } catch (...) {
        done(std::current_exception());
        return;
    }
    target->post([this, player, request, game, done = std::move(done)] {
        try {
            runtime(*game).submit(player, *request.stage);
            done(nullptr);
        } catch (...) {
            done(std::current_exception());
        }
    });
}

void Engine::control_submit(const PlayerId &player, const SubmitRequest &request)
{
    ensure_intake();
    auto state = this->player(player);
    if (!state)
        fail(Errc::not_found, "unknown player " + player.str());
    switch (request.step) {
    case SubmitStep::consent:
        transition(player, FlowEvent::consented);
        break;
    case SubmitStep::intro:
        if (state->phase == Phase::intro && state->intro_step + 1 < std::max<std::size_t>(experiment_.intro_steps, 1)) {
            transition(player, FlowEvent::intro_step);
        } else {
            transition(player, FlowEvent::intro_done);
            enter_lobby(player);
        }
        break;
    case SubmitStep::survey:
        transition(player, FlowEvent::survey_done);
        break;
    case SubmitStep::stage:
        fail(Errc::invalid_argument, "stage submissions go to the game");
    }
}

// ---- lobby -----------------------------------------------------------------

void Engine::enter_lobby(const PlayerId &player)
{
    if (seat(player))
        return;
    bool listed = with_state([&](const EngineState &s) {
        return std::find(s.waitlist.begin(), s.waitlist.end(), player) != s.waitlist.end();
    });
    if (!listed)
        commit(EventKind::lobby_event, Value{{"event", "waitlist"}, {"player", player.str()}},
               [&](EngineState &s) { s.waitlist.push_back(player); });
    if (listener_)
        listener_->on_player_update(player);
}

bool Engine::seat(const PlayerId &player)
{
    for (auto &batch_id : ordered_batches()) {
        struct Plan {
            std::vector<GameSlot> slots;
            AssignmentMethod method;
            std::uint64_t seed;
            std::uint64_t draws;
            int timeout_s;
            bool running;
        };
        auto plan = with_state([&](const EngineState &s) {
            auto &b = s.batches.at(batch_id);
            Plan p{b.assignment_slots(), b.spec.method, b.seed, b.draws, b.lobby.timeout_s,
                   b.status == BatchStatus::running};
            for (auto &slot : p.slots)
                slot.open = slot.open && s.games.at(slot.game).status == GameStatus::pending;
            return p;
        });
        if (!plan.running)
            continue;
        BatchAssigner assigner(plan.method, plan.slots, plan.seed, plan.draws);
        auto seat = assigner.assign(player);
        if (!seat)
            continue;
        Value body{{"event", "assign"},         {"batch", batch_id.str()},   {"game", seat->game.str()},
                   {"player", player.str()},    {"position", seat->position}, {"draws", assigner.draws()}};
        commit(EventKind::lobby_event, std::move(body), [&](EngineState &s) {
            auto &b = s.batches.at(batch_id);
            b.slot(seat->game)->members.push_back(player);
            b.draws = assigner.draws();
            std::erase(s.waitlist, player);
        });
        if (seat->position == 0) {
            auto opened = now();
            auto deadline = opened + TimeMs(plan.timeout_s) * 1000;
            commit(EventKind::lobby_event,
                   Value{{"event", "slot_timer"},
                         {"batch", batch_id.str()},
                         {"game", seat->game.str()},
                         {"opened_at", opened},
                         {"deadline", deadline},
                         {"extensions", 0}},
                   [&](EngineState &s) {
                       auto *slot = s.batches.at(batch_id).slot(seat->game);
                       slot->opened_at = opened;
                       slot->deadline = deadline;
                       slot->extensions = 0;
                   });
            arm_slot_timer(batch_id, seat->game, deadline);
        }
        if (listener_) {
            listener_->on_player_update(player);
            listener_->on_lobby_update(batch_id, seat->game);
        }
        auto full = with_state([&](const EngineState &s) {
            auto *slot = s.batches.at(batch_id).slot(seat->game);
            return slot->members.size() >= slot->capacity;
        });
        if (full)
            launch(batch_id, seat->game);
        schedule_lobby_tick();
        return true;
    }
    return false;
}

void Engine::seat_waitlist()
{
    auto waiting = with_state([](const EngineState &s) { return s.waitlist; });
    for (auto &p : waiting)
        if (!seat(p))
            break;
}

void Engine::unseat(const PlayerId &player)
{
    auto found = with_state([&](const EngineState &s) -> std::optional<std::pair<BatchId, GameId>> {
        for (auto &[id, b] : s.batches)
            for (auto &slot : b.slots)
                if (slot.open && std::find(slot.members.begin(), slot.members.end(), player) != slot.members.end())
                    return std::pair{id, slot.game};
        return std::nullopt;
    });
    if (!found) {
        commit(EventKind::lobby_event, Value{{"event", "unwaitlist"}, {"player", player.str()}},
               [&](EngineState &s) { std::erase(s.waitlist, player); });
        return;
    }
    auto [batch_id, game] = *found;
    commit(EventKind::lobby_event,
           Value{{"event", "unassign"}, {"batch", batch_id.str()}, {"game", game.str()}, {"player", player.str()}},
           [&](EngineState &s) { std::erase(s.batches.at(batch_id).slot(game)->members, player); });
    bool empty = with_state([&](const EngineState &s) { return s.batches.at(batch_id).slot(game)->members.empty(); });
    if (empty) {
        commit(EventKind::lobby_event,
               Value{{"event", "slot_timer"},
                     {"batch", batch_id.str()},
                     {"game", game.str()},
                     {"opened_at", nullptr},
                     {"deadline", nullptr},
                     {"extensions", 0}},
               [&](EngineState &s) {
                   auto *slot = s.batches.at(batch_id).slot(game);
                   slot->opened_at.reset();
                   slot->deadline.reset();
                   slot->extensions = 0;
               });
        if (auto it = slot_timers_.find(game); it != slot_timers_.end() && it->second.deadline) {
            control_->cancel(*it->second.deadline);
            it->second.deadline.reset();
        }
    }
    if (listener_)
        listener_->on_lobby_update(batch_id, game);
    seat_waitlist();
}

void Engine::arm_slot_timer(const BatchId &batch, const GameId &game, TimeMs deadline)
{
    auto &timers = slot_timers_[game];
    if (timers.deadline)
        control_->cancel(*timers.deadline);
    timers.deadline = control_->post_at(deadline, [this, batch, game] {
        slot_timers_[game].deadline.reset();
        slot_deadline(batch, game);
    });
}

void Engine::slot_deadline(const BatchId &batch, const GameId &game)
{
    auto lobby = with_state([&](const EngineState &s) -> std::optional<LobbyInstance> {
        auto &b = s.batches.at(batch);
        auto *slot = b.slot(game);
        if (b.status != BatchStatus::running || !slot || !slot->open || slot->members.empty())
            return std::nullopt;
        return LobbyInstance{slot->capacity, slot->members.size(), b.lobby, slot->opened_at, slot->deadline,
                             slot->extensions};
    });
    if (!lobby)
        return;
    auto action = vlab::lobby_tick(*lobby, now());
    auto timeout_body = [&](const char *what) {
        return Value{{"event", "timeout"},
                     {"batch", batch.str()},
                     {"game", game.str()},
                     {"action", what},
                     {"present", lobby->present}};
    };
    switch (action) {
    case LobbyAction::none:
        if (lobby->deadline)
            arm_slot_timer(batch, game, *lobby->deadline);
        break;
    case LobbyAction::launch:
        launch(batch, game);
        break;
    case LobbyAction::timeout_fail:
        commit(EventKind::lobby_event, timeout_body("fail"), [](EngineState &) {});
        lobby_exit_slot(batch, game, "lobby_timeout");
        break;
    case LobbyAction::timeout_start_anyway:
        commit(EventKind::lobby_event, timeout_body("start_anyway"), [](EngineState &) {});
        launch(batch, game);
        break;
    case LobbyAction::timeout_extend: {
        commit(EventKind::lobby_event, timeout_body("extend"), [](EngineState &) {});
        auto deadline = *lobby->deadline + TimeMs(lobby->config.timeout_s) * 1000;
        auto extensions = lobby->extensions + 1;
        commit(EventKind::lobby_event,
               Value{{"event", "slot_timer"},
                     {"batch", batch.str()},
                     {"game", game.str()},
                     {"opened_at", lobby->opened_at ? Value(*lobby->opened_at) : Value(nullptr)},
                     {"deadline", deadline},
                     {"extensions", extensions}},
               [&](EngineState &s) {
                   auto *slot = s.batches.at(batch).slot(game);
                   slot->deadline = deadline;
                   slot->extensions = extensions;
               });
        arm_slot_timer(batch, game, deadline);
        if (listener_)
            listener_->on_lobby_update(batch, game);
        break;
    }
    }
}

void Engine::lobby_exit_slot(const BatchId &batch, const GameId &game, const std::string &reason)
{
    auto members = with_state([&](const EngineState &s) { return s.batches.at(batch).slot(game)->members; });
    for (auto &m : members)
        transition(m, FlowEvent::lobby_exit, reason);
    commit(EventKind::lobby_event, Value{{"event", "slot_reset"}, {"batch", batch.str()}, {"game", game.str()}},
           [&](EngineState &s) {
               auto *slot = s.batches.at(batch).slot(game);
               slot->members.clear();
               slot->open = true;
               slot->opened_at.reset();
               slot->deadline.reset();
               slot->extensions = 0;
           });
    if (auto it = slot_timers_.find(game); it != slot_timers_.end() && it->second.deadline) {
        control_->cancel(*it->second.deadline);
        it->second.deadline.reset();
    }
    if (listener_)
        listener_->on_lobby_update(batch, game);
    seat_waitlist();
}

void Engine::launch(const BatchId &batch, const GameId &game)
{
    if (auto it = slot_timers_.find(game); it != slot_timers_.end() && it->second.deadline) {
        control_->cancel(*it->second.deadline);
        it->second.deadline.reset();
    }
    auto members = with_state([&](const EngineState &s) { return s.batches.at(batch).slot(game)->members; });
    Value players = Value::array();
    for (auto &m : members)
        players.push_back(m.str());
    commit(EventKind::lobby_event,
           Value{{"event", "launch"}, {"batch", batch.str()}, {"game", game.str()}, {"players", players}},
           [&](EngineState &s) {
               s.batches.at(batch).slot(game)->open = false;
               s.games.at(game).players = members;
           });
    for (auto &m : members)
        transition(m, FlowEvent::game_assigned, std::nullopt, game, batch);
    auto &rt = runtime(game);
    rt.strand()->post([&rt] { rt.start(); });
}

void Engine::schedule_lobby_tick()
{
    if (lobby_tick_armed_ || options_.lobby_tick_ms <= 0)
        return;
    lobby_tick_armed_ = true;
    control_->post_at(now() + options_.lobby_tick_ms, [this] { lobby_tick(); });
}

void Engine::lobby_tick()
{
    lobby_tick_armed_ = false;
    std::vector<std::pair<BatchId, GameId>> waiting;
    with_state([&](const EngineState &s) {
        for (auto &[id, b] : s.batches) {
            if (b.status != BatchStatus::running)
                continue;
            for (auto &slot : b.slots)
                if (slot.open && !slot.members.empty())
                    waiting.emplace_back(id, slot.game);
        }
        return 0;
    });
    if (waiting.empty())
        return;
    if (listener_)
        for (auto &[b, g] : waiting)
            listener_->on_lobby_update(b, g);
    schedule_lobby_tick();
}

void Engine::game_finished(const GameId &game)
{
    auto batch = with_state([&](const EngineState &s) { return s.games.at(game).batch; });
    check_batch_end(batch);
}

void Engine::check_batch_end(const BatchId &batch)
{
    bool done = with_state([&](const EngineState &s) {
        auto &b = s.batches.at(batch);
        if (b.status != BatchStatus::running)
            return false;
        for (auto &slot : b.slots)
            if (!is_terminal(s.games.at(slot.game).status))
                return false;
        return true;
    });
    if (!done)
        return;
    commit(EventKind::lobby_event, Value{{"event", "batch_status"}, {"batch", batch.str()}, {"status", "ended"}},
           [&](EngineState &s) { s.batches.at(batch).status = BatchStatus::ended; });
    release_waitlist("batch_full");
}

void Engine::release_waitlist(const std::string &reason)
{
    bool any_running = with_state([](const EngineState &s) {
        return std::any_of(s.batches.begin(), s.batches.end(),
                           [](auto &kv) { return kv.second.status == BatchStatus::running; });
    });
    if (any_running)
        return;
    auto waiting = with_state([](const EngineState &s) { return s.waitlist; });
    for (auto &p : waiting)
        transition(p, FlowEvent::lobby_exit, reason);
}

// ---- administration ----------------------------------------------------------

void Engine::record_configuration(const Value &config, const ActorId &actor)
{
    commit(EventKind::admin_action, Value{{"verb", "configure"}, {"actor", actor}, {"config", config}},
           [](EngineState &) {});
}

ProtocolId Engine::import_protocol(const std::string &yaml, const ActorId &actor)
{
    ensure_intake();
    parse_protocol(yaml);
    auto hash = sha256_hex(yaml);
    ProtocolId id("pr-" + hash.substr(0, 12));
    run_sync(control_, [&] {
        commit(EventKind::admin_action,
               Value{{"verb", "import_protocol"},
                     {"actor", actor},
                     {"protocol", id.str()},
                     {"text", yaml},
                     {"hash", hash}},
               [&](EngineState &s) { s.protocols[id] = StoredProtocol{id, yaml, hash}; });
    });
    return id;
}

BatchId Engine::create_batch(const ProtocolId &protocol_id, const BatchSpec &requested, const ActorId &actor)
{
    ensure_intake();
    return run_sync(control_, [&] {
        auto stored = with_state([&](const EngineState &s) -> std::optional<StoredProtocol> {
            auto it = s.protocols.find(protocol_id);
            if (it == s.protocols.end())
                return std::nullopt;
            return it->second;
        });
        if (!stored)
            fail(Errc::not_found, "unknown protocol " + protocol_id.str());
        auto protocol = parse_protocol(stored->text);
        validate_batch(protocol, requested);
        BatchSpec spec = requested;
        if (!spec.seed)
            spec.seed = std::stoull(tokens_->next_token().substr(0, 15), nullptr, 16);
        auto lobby = *protocol.lobby(spec.lobby);

        auto [batch_id, first_game] = with_state([](const EngineState &s) {
            return std::pair{BatchId("b" + std::to_string(s.batches.size() + 1)), s.games.size() + 1};
        });
        Value games = Value::array();
        std::vector<std::pair<GameId, const Treatment *>> planned;
        for (auto &quota : spec.quotas) {
            auto *treatment = protocol.treatment(quota.treatment);
            for (int k = 0; k < quota.games; ++k) {
                GameId id("g" + std::to_string(first_game + planned.size()));
                planned.emplace_back(id, treatment);
                games.push_back(Value{{"game", id.str()},
                                      {"treatment", to_value(*treatment)},
                                      {"capacity", treatment->player_count()}});
            }
        }
        Value body{{"verb", "create_batch"},    {"actor", actor},         {"batch", batch_id.str()},
                   {"protocol", protocol_id.str()}, {"spec", to_value(spec)}, {"lobby", to_value(lobby)},
                   {"seed", *spec.seed},        {"games", games}};
        commit(EventKind::admin_action, std::move(body), [&](EngineState &s) {
            BatchState b;
            b.id = batch_id;
            b.protocol = protocol_id;
            b.spec = spec;
            b.lobby = lobby;
            b.seed = *spec.seed;
            for (auto &[gid, treatment] : planned) {
                GameState g;
                g.id = gid;
                g.batch = batch_id;
                g.treatment = *treatment;
                s.games[gid] = std::move(g);
                LobbySlot slot;
                slot.game = gid;
                slot.treatment = treatment->name;
                slot.capacity = static_cast<std::size_t>(treatment->player_count());
                b.slots.push_back(std::move(slot));
            }
            s.batches[batch_id] = std::move(b);
        });
        return batch_id;
    });
}

void Engine::start_batch(const BatchId &batch_id, const ActorId &actor)
{
    ensure_intake();
    run_sync(control_, [&] {
        auto b = batch(batch_id);
        if (!b)
            fail(Errc::not_found, "unknown batch " + batch_id.str());
        if (b->status != BatchStatus::created)
            fail(Errc::conflict, "batch " + batch_id.str() + " is " + std::string(to_string(b->status)));
        commit(EventKind::admin_action, Value{{"verb", "start_batch"}, {"actor", actor}, {"batch", batch_id.str()}},
               [&](EngineState &s) { s.batches.at(batch_id).status = BatchStatus::running; });
        seat_waitlist();
        schedule_lobby_tick();
    });
}

void Engine::stop_batch(const BatchId &batch_id, const ActorId &actor)
{
    ensure_intake();
    auto live = run_sync(control_, [&] {
        auto b = batch(batch_id);
        if (!b)
            fail(Errc::not_found, "unknown batch " + batch_id.str());
        if (b->status != BatchStatus::running)
            fail(Errc::conflict, "batch " + batch_id.str() + " is " + std::string(to_string(b->status)));
        commit(EventKind::admin_action, Value{{"verb", "stop_batch"}, {"actor", actor}, {"batch", batch_id.str()}},
               [&](EngineState &s) { s.batches.at(batch_id).status = BatchStatus::terminated; });
        std::vector<GameId> games;
        for (auto &slot : b->slots) {
            if (slot.open && !slot.members.empty())
                lobby_exit_slot(batch_id, slot.game, "terminated");
            if (!is_terminal(game(slot.game)->status))
                games.push_back(slot.game);
        }
        release_waitlist("terminated");
        return games;
    });
    for (auto &g : live) {
        auto &rt = runtime(g);
        run_sync(rt.strand(), [&] { rt.terminate("terminated", "terminated"); });
    }
}

void Engine::terminate_game(const GameId &game_id, const ActorId &actor)
{
    ensure_intake();
    run_sync(control_, [&] {
        auto g = game(game_id);
        if (!g)
            fail(Errc::not_found, "unknown game " + game_id.str());
        if (is_terminal(g->status))
            fail(Errc::conflict, "game " + game_id.str() + " already " + std::string(to_string(g->status)));
        commit(EventKind::admin_action, Value{{"verb", "terminate_game"}, {"actor", actor}, {"game", game_id.str()}},
               [](EngineState &) {});
        auto slot_open = with_state([&](const EngineState &s) {
            auto *slot = s.batches.at(g->batch).slot(game_id);
            return slot && slot->open && !slot->members.empty();
        });
        if (slot_open)
            lobby_exit_slot(g->batch, game_id, "terminated");
    });
    auto &rt = runtime(game_id);
    run_sync(rt.strand(), [&] { rt.terminate("terminated", "terminated"); });
}

void Engine::retire_player(const PlayerId &player_id, const ActorId &actor)
{
    ensure_intake();
    auto in_game = run_sync(control_, [&]() -> std::optional<GameId> {
        auto p = player(player_id);
        if (!p)
            fail(Errc::not_found, "unknown player " + player_id.str());
        if (p->phase == Phase::exited)
            fail(Errc::conflict, "player " + player_id.str() + " already exited");
        commit(EventKind::admin_action,
               Value{{"verb", "retire_player"}, {"actor", actor}, {"player", player_id.str()}},
               [](EngineState &) {});
        if (p->phase == Phase::game && p->current_game)
            return p->current_game;
        if (p->phase == Phase::lobby)
            unseat(player_id);
        drop_player(player_id, "retired");
        return std::nullopt;
    });
    if (in_game) {
        auto &rt = runtime(*in_game);
        run_sync(rt.strand(), [&] { rt.retire(player_id); });
    }
}

void Engine::record_export(const BatchId &batch_id, const Value &details, const ActorId &actor)
{
    Value body{{"verb", "export"}, {"actor", actor}, {"batch", batch_id.str()}};
    for (auto &[k, v] : details.items())
        body[k] = v;
    run_sync(control_, [&] { commit(EventKind::admin_action, std::move(body), [](EngineState &) {}); });
}

// ---- restore -----------------------------------------------------------------

void Engine::restore(const EngineState &restored)
{
    {
        std::unique_lock lock(state_mutex_);
        state_ = restored;
        state_.attributes.clear();
        state_.logs.clear();
    }
    store_.restore(restored.attributes, restored.logs);
    by_token_hash_.clear();
    for (auto &[id, p] : restored.players)
        by_token_hash_[p.token_hash] = id;

    run_sync(control_, [&] {
        for (auto &[id, p] : restored.players)
            if (p.phase == Phase::lobby || p.phase == Phase::game)
                player_offline(id);
        for (auto &[bid, b] : restored.batches) {
            if (b.status != BatchStatus::running)
                continue;
            for (auto &slot : b.slots)
                if (slot.open && slot.deadline && !slot.members.empty())
                    arm_slot_timer(bid, slot.game, *slot.deadline);
        }
        schedule_lobby_tick();
    });
    for (auto &[gid, g] : restored.games) {
        if (is_terminal(g.status) || (g.status == GameStatus::pending && g.players.empty()))
            continue;
        auto &rt = runtime(gid);
        rt.strand()->post([&rt] { rt.resume_after_restore(); });
    }
}

} // namespace vlab
