// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/lifecycle/engine.hpp"

namespace vlab {

// Per-game state machine. Every member function except the constructor runs on
// the game's strand.
class Engine::GameRuntime final : public GameContext {
public:
    GameRuntime(Engine &engine, GameId id, std::shared_ptr<Strand> strand);

    const std::shared_ptr<Strand> &strand() const noexcept { return strand_; }

    void start();
    void client_write(const PlayerId &player, const ScopeRef &scope, const std::string &key, ChangeOp op,
                      Value value);
    bool submit(const PlayerId &player, const StageId &stage);
    void disconnect(const PlayerId &player);
    void reconnect(const PlayerId &player);
    void retire(const PlayerId &player);
    void terminate(const std::string &game_reason, const std::string &outro_reason);
    // Re-arms timers after a restart.
    void resume_after_restore();

    // GameContext
    const GameId &game_id() const override { return id_; }
    const Treatment &treatment() const override { return treatment_; }
    std::vector<PlayerId> players() const override;
    TimeMs now() const override { return engine_.now(); }
    std::size_t round_count() const override;
    std::optional<std::size_t> round_index() const override;
    std::optional<std::size_t> stage_index() const override;
    std::optional<std::string> stage_name() const override;
    std::size_t add_round() override;
    void add_stage(std::size_t round, StageSpec stage) override;
    std::optional<Value> get(const ScopeRef &scope, const std::string &key) const override;
    std::uint64_t set(const ScopeRef &scope, const std::string &key, Value value) override;
    std::uint64_t append(const ScopeRef &scope, const std::string &key, Value element) override;
    void log(const ScopeRef &scope, const std::string &name, Value payload) override;
    void publish(const std::string &key) override;
    void end_stage() override;
    void remove_player(const PlayerId &player) override;
    void cancel(const std::string &reason) override;
    void pause() override;
    void resume() override;

private:
    template <typename Fn>
    auto read(Fn &&fn) const
    {
        return engine_.with_state([&](const EngineState &s) { return fn(s.games.at(id_)); });
    }

    bool fire(const char *hook, const Callbacks::Hook &fn, std::optional<std::size_t> round,
              std::optional<std::size_t> stage);
    void fail_hook(const char *hook, const std::string &message);
    void enter(std::size_t round, std::size_t stage, bool new_round);
    void advance(const std::string &reason);
    void drive();
    void request_end(const std::string &reason);
    void check_complete(const std::string &reason);
    void finish(GameStatus status, const std::string &game_reason, const std::string &outro_reason,
                Value error = nullptr);
    void remove(const PlayerId &player, const std::string &reason);
    void do_pause();
    void do_resume();
    void arm_timer(TimeMs deadline, std::size_t round, std::size_t stage);
    void cancel_timer();
    void emit(const ChangeEvent &change);
    void check_server_scope(const ScopeRef &scope) const;
    Value event_body(const char *event) const;

    Engine &engine_;
    GameId id_;
    std::shared_ptr<Strand> strand_;
    Treatment treatment_;

    std::optional<TimerId> timer_;
    std::uint64_t timer_generation_ = 0;
    std::set<PlayerId> paused_for_;

    bool driving_ = false;
    bool finished_ = false;
    std::optional<std::string> pending_end_;

    bool init_open_ = false;
    std::vector<std::vector<StageSpec>> structure_;
    std::optional<std::size_t> hook_round_;
    std::optional<std::size_t> hook_stage_;
    bool in_hook_ = false;

    bool holding_ = false;
    std::vector<ChangeEvent> held_;
};

} // namespace vlab
