// SPDX-License-Identifier: Apache-2.0
#include "game_runtime.hpp"

#include "vlab/common/error.hpp"

#include <algorithm>

namespace vlab {

Engine::GameRuntime::GameRuntime(Engine &engine, GameId id, std::shared_ptr<Strand> strand)
    : engine_(engine), id_(std::move(id)), strand_(std::move(strand))
{
    treatment_ = read([](const GameState &g) { return g.treatment; });
    finished_ = read([](const GameState &g) { return is_terminal(g.status); });
}

Value Engine::GameRuntime::event_body(const char *event) const
{
    return Value{{"game", id_.str()}, {"event", event}};
}

// ---- hooks ---------------------------------------------------------------

bool Engine::GameRuntime::fire(const char *hook, const Callbacks::Hook &fn, std::optional<std::size_t> round,
                               std::optional<std::size_t> stage)
{
    if (finished_)
        return false;
    Value body{{"game", id_.str()}, {"hook", hook}};
    if (round)
        body["round"] = *round;
    if (stage)
        body["stage"] = *stage;
    engine_.commit(EventKind::hook_fired, std::move(body), [](EngineState &) {});
    if (!fn)
        return true;

    auto saved_round = hook_round_;
    auto saved_stage = hook_stage_;
    bool saved_in_hook = in_hook_;
    hook_round_ = round;
    hook_stage_ = stage;
    in_hook_ = true;
    std::optional<std::string> error;
    try {
        fn(*this);
    } catch (const std::exception &e) {
        error = e.what();
    } catch (...) {
        error = "unknown exception";
    }
    hook_round_ = saved_round;
    hook_stage_ = saved_stage;
    in_hook_ = saved_in_hook;
    if (error) {
        fail_hook(hook, *error);
        return false;
    }
    return !finished_;
}

void Engine::GameRuntime::fail_hook(const char *hook, const std::string &message)
{
    finish(GameStatus::cancelled, "hook_error", "cancelled", Value{{"hook", hook}, {"message", message}});
}

// ---- lifecycle -----------------------------------------------------------

void Engine::GameRuntime::start()
{
    if (finished_ || read([](const GameState &g) { return g.status != GameStatus::pending || !g.rounds.empty(); }))
        return;

    auto &callbacks = engine_.experiment_.callbacks;
    structure_.clear();
    init_open_ = true;
    bool ok = fire("on_game_init", callbacks.on_game_init, std::nullopt, std::nullopt);
    init_open_ = false;
    if (!ok)
        return;
    if (structure_.empty() && !callbacks.on_game_init)
        structure_ = default_structure();

    std::string problem;
    if (structure_.empty())
        problem = "game declares no rounds";
    for (std::size_t r = 0; r < structure_.size() && problem.empty(); ++r) {
        if (structure_[r].empty())
            problem = "round " + std::to_string(r) + " has no stages";
        for (auto &s : structure_[r])
            if (!s.duration_s && !s.advance_on_submit)
                problem = "stage '" + s.name + "' needs a duration or advance_on_submit";
    }
    if (!problem.empty()) {
        finish(GameStatus::cancelled, "invalid_structure", "cancelled", Value{{"message", problem}});
        return;
    }

    Value rounds = Value::array();
    for (auto &round : structure_) {
        Value stages = Value::array();
        for (auto &s : round)
            stages.push_back(Value{{"name", s.name},
                                   {"duration", s.duration_s ? Value(*s.duration_s) : Value(nullptr)},
                                   {"advance_on_submit", s.advance_on_submit}});
        rounds.push_back(Value{{"stages", stages}});
    }
    auto body = event_body("structure");
    body["rounds"] = rounds;
    engine_.commit(EventKind::game_event, std::move(body), [&](EngineState &s) {
        auto &game = s.games.at(id_);
        game.rounds.clear();
        for (std::size_t r = 0; r < structure_.size(); ++r) {
            RoundState round;
            round.index = r;
            round.id = make_round_id(id_, r);
            for (std::size_t k = 0; k < structure_[r].size(); ++k) {
                StageState stage;
                stage.index = k;
                stage.id = make_stage_id(id_, r, k);
                stage.name = structure_[r][k].name;
                stage.duration_s = structure_[r][k].duration_s;
                stage.advance_on_submit = structure_[r][k].advance_on_submit;
                round.stages.push_back(std::move(stage));
            }
            game.rounds.push_back(std::move(round));
        }
    });
    structure_.clear();
    enter(0, 0, true);
    drive();
}

void Engine::GameRuntime::enter(std::size_t round, std::size_t stage, bool new_round)
{
    auto started = now();
    auto duration = read([&](const GameState &g) { return g.rounds.at(round).stages.at(stage).duration_s; });
    std::optional<TimeMs> deadline;
    if (duration)
        deadline = started + TimeMs(*duration) * 1000;

    auto body = event_body("stage_start");
    body["round"] = round;
    body["stage"] = stage;
    body["started_at"] = started;
    body["deadline"] = deadline ? Value(*deadline) : Value(nullptr);
    engine_.commit(EventKind::game_event, std::move(body), [&](EngineState &s) {
        auto &game = s.games.at(id_);
        game.cursor = Cursor::at(round, stage);
        auto &st = game.rounds.at(round).stages.at(stage);
        st.started_at = started;
        st.deadline = deadline;
    });

    auto &callbacks = engine_.experiment_.callbacks;
    if (new_round && !fire("on_round_start", callbacks.on_round_start, round, std::nullopt))
        return;
    if (!fire("on_stage_start", callbacks.on_stage_start, round, stage))
        return;

    bool entered = false;
    if (read([](const GameState &g) { return g.status == GameStatus::pending; })) {
        auto status = event_body("status");
        status["status"] = "running";
        engine_.commit(EventKind::game_event, std::move(status),
                       [&](EngineState &s) { s.games.at(id_).status = GameStatus::running; });
        entered = true;
    }
    if (deadline && read([](const GameState &g) { return g.status == GameStatus::running; }))
        arm_timer(*deadline, round, stage);
    if (engine_.listener_)
        engine_.listener_->on_game_update(id_, entered);
    check_complete("all_submitted");
}

void Engine::GameRuntime::advance(const std::string &reason)
{
    auto cursor = read([](const GameState &g) { return g.cursor; });
    if (cursor.position != Cursor::Position::active)
        return;
    auto r = cursor.round;
    auto k = cursor.stage;
    if (read([&](const GameState &g) { return g.rounds.at(r).stages.at(k).end_reason.has_value(); }))
        return;
    cancel_timer();

    auto body = event_body("stage_end");
    body["round"] = r;
    body["stage"] = k;
    body["reason"] = reason;
    engine_.commit(EventKind::game_event, std::move(body),
                   [&](EngineState &s) { s.games.at(id_).rounds.at(r).stages.at(k).end_reason = reason; });

    auto &callbacks = engine_.experiment_.callbacks;
    if (!fire("on_stage_end", callbacks.on_stage_end, r, k))
        return;
    auto [stages, rounds] = read([&](const GameState &g) { return std::pair{g.rounds.at(r).stages.size(), g.rounds.size()}; });
    if (k + 1 < stages) {
        enter(r, k + 1, false);
        return;
    }
    if (!fire("on_round_end", callbacks.on_round_end, r, std::nullopt))
        return;
    if (r + 1 < rounds) {
        enter(r + 1, 0, true);
        return;
    }
    if (!fire("on_game_end", callbacks.on_game_end, std::nullopt, std::nullopt))
        return;
    finish(GameStatus::ended, "completed", "completed");
}

void Engine::GameRuntime::request_end(const std::string &reason)
{
    if (!pending_end_)
        pending_end_ = reason;
}

void Engine::GameRuntime::drive()
{
    if (driving_ || in_hook_)
        return;
    driving_ = true;
    while (!finished_ && pending_end_) {
        auto reason = *pending_end_;
        pending_end_.reset();
        advance(reason);
    }
    pending_end_.reset();
    driving_ = false;
}

void Engine::GameRuntime::check_complete(const std::string &reason)
{
    if (finished_)
        return;
    bool complete = read([](const GameState &g) {
        if (g.status != GameStatus::running)
            return false;
        auto *stage = g.current_stage();
        if (!stage || stage->end_reason || !stage->advance_on_submit)
            return false;
        for (auto &p : g.active_players())
            if (!stage->submitted.count(p))
                return false;
        return true;
    });
    if (complete)
        request_end(reason);
}

void Engine::GameRuntime::finish(GameStatus status, const std::string &game_reason, const std::string &outro_reason,
                                 Value error)
{
    if (finished_)
        return;
    finished_ = true;
    cancel_timer();
    pending_end_.reset();
    paused_for_.clear();

    auto body = event_body("status");
    body["status"] = to_string(status);
    body["reason"] = game_reason;
    if (!error.is_null())
        body["error"] = std::move(error);
    engine_.commit(EventKind::game_event, std::move(body), [&](EngineState &s) {
        auto &game = s.games.at(id_);
        game.status = status;
        game.end_reason = game_reason;
        if (status == GameStatus::ended)
            game.cursor = Cursor::ended();
    });

    auto roster = read([](const GameState &g) { return g.active_players(); });
    for (auto &p : roster) {
        auto state = engine_.player(p);
        if (state && state->phase == Phase::game && state->current_game == id_)
            engine_.transition(p, FlowEvent::game_over, outro_reason, id_, state->batch);
    }
    if (engine_.listener_)
        engine_.listener_->on_game_update(id_, false);
    auto *engine = &engine_;
    auto id = id_;
    engine_.control_->post([engine, id] { engine->game_finished(id); });
}

// ---- player actions ------------------------------------------------------

bool Engine::GameRuntime::submit(const PlayerId &player, const StageId &stage_id)
{
    struct View {
        GameStatus status;
        const StageState *stage;
        bool member;
        std::size_t round;
        std::size_t index;
        bool already;
        bool complete;
        bool advance;
    };
    auto view = read([&](const GameState &g) {
        View v{g.status, g.current_stage(), false, g.cursor.round, g.cursor.stage, false, false, false};
        auto active = g.active_players();
        v.member = std::find(active.begin(), active.end(), player) != active.end();
        if (v.stage) {
            v.already = v.stage->submitted.count(player) > 0;
            v.advance = v.stage->advance_on_submit;
            if (v.stage->id != stage_id)
                v.stage = nullptr;
        }
        return v;
    });
    if (view.status == GameStatus::paused)
        fail(Errc::game_paused, "game " + id_.str() + " is paused");
    if (view.status != GameStatus::running)
        fail(Errc::game_closed, "game " + id_.str() + " is not running");
    if (!view.stage)
        fail(Errc::stale_stage, "stage " + stage_id.str() + " is not the current stage");
    if (!view.member)
        fail(Errc::forbidden, "player " + player.str() + " is not in the active roster");

    auto complete = [&] {
        return read([](const GameState &g) {
            auto *stage = g.current_stage();
            for (auto &p : g.active_players())
                if (!stage->submitted.count(p))
                    return false;
            return true;
        });
    };
    if (view.already)
        return complete();

    auto body = event_body("submit");
    body["player"] = player.str();
    body["round"] = view.round;
    body["stage"] = view.index;
    engine_.commit(EventKind::game_event, std::move(body), [&](EngineState &s) {
        s.games.at(id_).rounds.at(view.round).stages.at(view.index).submitted.insert(player);
    });
    if (engine_.listener_)
        engine_.listener_->on_game_update(id_, false);
    bool done = complete();
    if (done && view.advance) {
        request_end("all_submitted");
        drive();
    }
    return done;
}

void Engine::GameRuntime::client_write(const PlayerId &player, const ScopeRef &scope, const std::string &key,
                                       ChangeOp op, Value value)
{
    auto status = read([&](const GameState &g) {
        auto active = g.active_players();
        if (std::find(active.begin(), active.end(), player) == active.end())
            fail(Errc::forbidden, "player " + player.str() + " is not in game " + id_.str());
        return g.status;
    });
    if (is_terminal(status))
        fail(Errc::game_closed, "game " + id_.str() + " has ended");
    if (status == GameStatus::pending)
        fail(Errc::forbidden, "game " + id_.str() + " has not started");
    if (scope.kind() == ScopeKind::player) {
        if (scope.primary() != player.str())
            fail(Errc::forbidden, "players may only write their own player scope");
    } else if (scope.game_id() != id_) {
        fail(Errc::forbidden, "scope belongs to another game");
    } else if (scope.composite() && scope.secondary() != player.str()) {
        fail(Errc::forbidden, "players may only write their own composite scopes");
    }

    auto change = op == ChangeOp::set ? engine_.store_.set(scope, key, std::move(value), player.str(), now())
                                      : engine_.store_.append(scope, key, std::move(value), player.str(), now());
    auto &handler = engine_.experiment_.callbacks.on_change;
    if (!handler) {
        emit(change);
        return;
    }
    holding_ = true;
    auto saved_in_hook = in_hook_;
    in_hook_ = true;
    std::optional<std::string> error;
    try {
        handler(*this, change);
    } catch (const std::exception &e) {
        error = e.what();
    } catch (...) {
        error = "unknown exception";
    }
    in_hook_ = saved_in_hook;
    holding_ = false;
    emit(change);
    auto held = std::move(held_);
    held_.clear();
    for (auto &c : held)
        emit(c);
    if (error)
        fail_hook("on_change", *error);
    drive();
}

void Engine::GameRuntime::emit(const ChangeEvent &change)
{
    if (holding_) {
        held_.push_back(change);
        return;
    }
    if (engine_.listener_)
        engine_.listener_->on_change(change);
}

void Engine::GameRuntime::disconnect(const PlayerId &player)
{
    if (finished_)
        return;
    auto [status, active] = read([&](const GameState &g) {
        auto roster = g.active_players();
        return std::pair{g.status, std::find(roster.begin(), roster.end(), player) != roster.end()};
    });
    if (!active || (status != GameStatus::running && status != GameStatus::paused))
        return;
    switch (engine_.experiment_.disconnect.mode) {
    case DisconnectMode::continue_without:
        remove(player, "disconnected");
        break;
    case DisconnectMode::cancel_trial:
        engine_.drop_player(player, "disconnected");
        finish(GameStatus::cancelled, "player_disconnected", "cancelled");
        break;
    case DisconnectMode::pause_trial:
        paused_for_.insert(player);
        do_pause();
        break;
    case DisconnectMode::custom: {
        auto &handler = engine_.experiment_.callbacks.on_disconnect;
        auto saved_in_hook = in_hook_;
        in_hook_ = true;
        std::optional<std::string> error;
        try {
            if (handler)
                handler(*this, player);
        } catch (const std::exception &e) {
            error = e.what();
        }
        in_hook_ = saved_in_hook;
        if (error)
            fail_hook("on_disconnect", *error);
        break;
    }
    }
    drive();
}

void Engine::GameRuntime::reconnect(const PlayerId &player)
{
    if (paused_for_.erase(player) && paused_for_.empty())
        do_resume();
}

void Engine::GameRuntime::retire(const PlayerId &player)
{
    bool member = read([&](const GameState &g) {
        auto roster = g.active_players();
        return std::find(roster.begin(), roster.end(), player) != roster.end();
    });
    if (!member || finished_) {
        auto state = engine_.player(player);
        if (state && state->phase != Phase::exited)
            engine_.drop_player(player, "retired");
        return;
    }
    remove(player, "retired");
    drive();
}

void Engine::GameRuntime::terminate(const std::string &game_reason, const std::string &outro_reason)
{
    finish(GameStatus::cancelled, game_reason, outro_reason);
}

void Engine::GameRuntime::remove(const PlayerId &player, const std::string &reason)
{
    auto body = event_body("roster_remove");
    body["player"] = player.str();
    engine_.commit(EventKind::game_event, std::move(body),
                   [&](EngineState &s) { s.games.at(id_).removed.insert(player); });
    paused_for_.erase(player);
    auto state = engine_.player(player);
    if (state && state->phase != Phase::exited)
        engine_.drop_player(player, reason);
    if (engine_.listener_)
        engine_.listener_->on_game_update(id_, false);
    if (read([](const GameState &g) { return g.active_players().empty(); })) {
        finish(GameStatus::cancelled, "abandoned", "cancelled");
        return;
    }
    if (paused_for_.empty() && read([](const GameState &g) { return g.status == GameStatus::paused; }))
        do_resume();
    check_complete("policy");
}

void Engine::GameRuntime::do_pause()
{
    auto view = read([](const GameState &g) {
        auto *stage = g.current_stage();
        return std::pair{g.status, stage ? stage->deadline : std::nullopt};
    });
    if (view.first != GameStatus::running)
        return;
    cancel_timer();
    std::optional<TimeMs> remaining;
    if (view.second)
        remaining = std::max<TimeMs>(0, *view.second - now());
    auto body = event_body("status");
    body["status"] = "paused";
    body["remaining_ms"] = remaining ? Value(*remaining) : Value(nullptr);
    engine_.commit(EventKind::game_event, std::move(body), [&](EngineState &s) {
        auto &game = s.games.at(id_);
        game.status = GameStatus::paused;
        game.paused_remaining_ms = remaining;
    });
    if (engine_.listener_)
        engine_.listener_->on_game_update(id_, false);
}

void Engine::GameRuntime::do_resume()
{
    auto view = read([](const GameState &g) { return std::pair{g.status, g.paused_remaining_ms}; });
    if (view.first != GameStatus::paused)
        return;
    paused_for_.clear();
    std::optional<TimeMs> deadline;
    if (view.second)
        deadline = now() + *view.second;
    auto body = event_body("status");
    body["status"] = "running";
    body["deadline"] = deadline ? Value(*deadline) : Value(nullptr);
    engine_.commit(EventKind::game_event, std::move(body), [&](EngineState &s) {
        auto &game = s.games.at(id_);
        game.status = GameStatus::running;
        game.paused_remaining_ms.reset();
        game.rounds.at(game.cursor.round).stages.at(game.cursor.stage).deadline = deadline;
    });
    auto cursor = read([](const GameState &g) { return g.cursor; });
    if (deadline)
        arm_timer(*deadline, cursor.round, cursor.stage);
    if (engine_.listener_)
        engine_.listener_->on_game_update(id_, false);
    check_complete("policy");
}

void Engine::GameRuntime::resume_after_restore()
{
    auto view = read([](const GameState &g) {
        auto *stage = g.current_stage();
        return std::tuple{g.status, g.cursor, stage ? stage->deadline : std::nullopt, g.players.empty()};
    });
    auto [status, cursor, deadline, empty] = view;
    if (status == GameStatus::pending && !empty) {
        start();
        return;
    }
    if (status == GameStatus::running && deadline)
        arm_timer(*deadline, cursor.round, cursor.stage);
    check_complete("all_submitted");
    drive();
}

void Engine::GameRuntime::arm_timer(TimeMs deadline, std::size_t round, std::size_t stage)
{
    cancel_timer();
    auto generation = ++timer_generation_;
    timer_ = strand_->post_at(deadline, [this, generation, round, stage] {
        if (generation != timer_generation_ || finished_)
            return;
        timer_.reset();
        bool due = read([&](const GameState &g) {
            auto *s = g.current_stage();
            return g.status == GameStatus::running && g.cursor == Cursor::at(round, stage) && s && !s->end_reason;
        });
        if (!due)
            return;
        request_end("timer");
        drive();
    });
}

void Engine::GameRuntime::cancel_timer()
{
    ++timer_generation_;
    if (timer_) {
        strand_->cancel(*timer_);
        timer_.reset();
    }
}

// ---- GameContext ---------------------------------------------------------

std::vector<PlayerId> Engine::GameRuntime::players() const
{
    return read([](const GameState &g) { return g.active_players(); });
}

std::size_t Engine::GameRuntime::round_count() const
{
    if (init_open_)
        return structure_.size();
    return read([](const GameState &g) { return g.rounds.size(); });
}

std::optional<std::size_t> Engine::GameRuntime::round_index() const
{
    if (in_hook_ && (hook_round_ || init_open_))
        return hook_round_;
    auto cursor = read([](const GameState &g) { return g.cursor; });
    if (cursor.position != Cursor::Position::active)
        return hook_round_;
    return cursor.round;
}

std::optional<std::size_t> Engine::GameRuntime::stage_index() const
{
    if (in_hook_ && (hook_stage_ || init_open_))
        return hook_stage_;
    if (in_hook_ && hook_round_)
        return std::nullopt;
    auto cursor = read([](const GameState &g) { return g.cursor; });
    if (cursor.position != Cursor::Position::active)
        return std::nullopt;
    return cursor.stage;
}

std::optional<std::string> Engine::GameRuntime::stage_name() const
{
    auto r = round_index();
    auto s = stage_index();
    if (!r || !s)
        return std::nullopt;
    return read([&](const GameState &g) { return g.rounds.at(*r).stages.at(*s).name; });
}

std::size_t Engine::GameRuntime::add_round()
{
    if (!init_open_)
        fail(Errc::flow_violation, "rounds can only be added during on_game_init");
    structure_.emplace_back();
    return structure_.size() - 1;
}

void Engine::GameRuntime::add_stage(std::size_t round, StageSpec stage)
{
    if (!init_open_)
        fail(Errc::flow_violation, "stages can only be added during on_game_init");
    if (round >= structure_.size())
        fail(Errc::invalid_argument, "round " + std::to_string(round) + " does not exist");
    if (stage.name.empty())
        fail(Errc::invalid_argument, "stage name must be non-empty");
    if (stage.duration_s && *stage.duration_s <= 0)
        fail(Errc::invalid_argument, "stage duration must be a positive number of seconds");
    structure_[round].push_back(std::move(stage));
}

void Engine::GameRuntime::check_server_scope(const ScopeRef &scope) const
{
    if (scope.kind() == ScopeKind::player) {
        PlayerId p(scope.primary());
        if (!read([&](const GameState &g) { return g.is_member(p); }))
            fail(Errc::forbidden, "player " + p.str() + " is not in game " + id_.str());
        return;
    }
    if (scope.game_id() != id_)
        fail(Errc::forbidden, "scope " + scope.to_string() + " belongs to another game");
}

std::optional<Value> Engine::GameRuntime::get(const ScopeRef &scope, const std::string &key) const
{
    engine_.check_readable(scope);
    return engine_.store_.get(scope, key);
}

std::uint64_t Engine::GameRuntime::set(const ScopeRef &scope, const std::string &key, Value value)
{
    check_server_scope(scope);
    auto change = engine_.store_.set(scope, key, std::move(value), server_actor, now());
    emit(change);
    return change.version;
}

std::uint64_t Engine::GameRuntime::append(const ScopeRef &scope, const std::string &key, Value element)
{
    check_server_scope(scope);
    auto change = engine_.store_.append(scope, key, std::move(element), server_actor, now());
    emit(change);
    return change.version;
}

void Engine::GameRuntime::log(const ScopeRef &scope, const std::string &name, Value payload)
{
    check_server_scope(scope);
    engine_.store_.log(scope, name, std::move(payload), server_actor, now());
}

void Engine::GameRuntime::publish(const std::string &key)
{
    if (key.empty())
        fail(Errc::invalid_argument, "key must be non-empty");
    if (read([&](const GameState &g) { return g.public_keys.count(key) > 0; }))
        return;
    auto body = event_body("public_key");
    body["key"] = key;
    engine_.commit(EventKind::game_event, std::move(body),
                   [&](EngineState &s) { s.games.at(id_).public_keys.insert(key); });
}

void Engine::GameRuntime::end_stage()
{
    request_end("policy");
    drive();
}

void Engine::GameRuntime::remove_player(const PlayerId &player)
{
    if (!read([&](const GameState &g) { return g.is_member(player) && !g.removed.count(player); }))
        fail(Errc::invalid_argument, "player " + player.str() + " is not in the active roster");
    remove(player, "removed");
}

void Engine::GameRuntime::cancel(const std::string &reason)
{
    finish(GameStatus::cancelled, reason.empty() ? "custom" : reason, "custom");
}

void Engine::GameRuntime::pause()
{
    do_pause();
}

void Engine::GameRuntime::resume()
{
    paused_for_.clear();
    do_resume();
}

} // namespace vlab
