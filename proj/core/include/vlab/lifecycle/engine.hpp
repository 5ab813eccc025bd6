// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/crypto.hpp"
#include "vlab/journal/journal.hpp"
#include "vlab/lifecycle/experiment.hpp"
#include "vlab/lifecycle/flow.hpp"
#include "vlab/lifecycle/lobby.hpp"
#include "vlab/model/attribute_store.hpp"
#include "vlab/model/engine_state.hpp"
#include "vlab/runtime/scheduler.hpp"

#include <exception>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <type_traits>
#include <vector>

namespace vlab {

// Receives engine output destined for connected clients. Calls arrive on the
// executor that made the change, in commit order for that executor, and never
// while engine locks are held.
class EngineListener {
public:
    virtual ~EngineListener() = default;
    virtual void on_change(const ChangeEvent &change) = 0;
    virtual void on_player_update(const PlayerId &player) = 0;
    // `entered` is true when the game just became visible to its players.
    virtual void on_game_update(const GameId &game, bool entered) = 0;
    virtual void on_lobby_update(const BatchId &batch, const GameId &game) = 0;
};

struct HelloResult {
    PlayerId player;
    // Fresh session secret for a new or re-identified player; empty on token resume.
    std::string token;
    bool created = false;
    bool resumed = false;
};

enum class SubmitStep { consent, intro, stage, survey };

std::optional<SubmitStep> parse_submit_step(std::string_view text) noexcept;

struct SubmitRequest {
    SubmitStep step = SubmitStep::stage;
    // Required for stage submissions.
    std::optional<StageId> stage;
};

using Completion = std::function<void(std::exception_ptr)>;

struct EngineOptions {
    // Period of lobby status pushes.
    TimeMs lobby_tick_ms = 1000;
};

// The experiment runtime: player flow, lobbies, batches and games. Game logic runs
// on one strand per game and everything else on a control strand; all state
// changes are journaled before they take effect.
class Engine final : public ScopeResolver {
public:
    Engine(Scheduler &scheduler, Journal &journal, Experiment experiment, std::unique_ptr<TokenSource> tokens,
           EngineOptions options = {});
    ~Engine() override;

    Engine(const Engine &) = delete;
    Engine &operator=(const Engine &) = delete;

    void set_listener(EngineListener *listener) noexcept { listener_ = listener; }

    Scheduler &scheduler() noexcept { return scheduler_; }
    Journal &journal() noexcept { return journal_; }
    AttributeStore &store() noexcept { return store_; }
    const Experiment &experiment() const noexcept { return experiment_; }
    const std::shared_ptr<Strand> &control() const noexcept { return control_; }
    std::shared_ptr<Strand> game_strand(const GameId &game);

    // Runs fn on `strand` and returns its result. Under a virtual scheduler fn runs
    // inline; otherwise the caller blocks, so never call this from a strand task.
    template <typename Fn>
    auto run_sync(const std::shared_ptr<Strand> &strand, Fn &&fn) -> std::invoke_result_t<Fn>;

    // Rebuilds live state from a replayed journal (call before any traffic).
    void restore(const EngineState &state);
    // Journals the startup configuration.
    void record_configuration(const Value &config, const ActorId &actor = server_actor);

    // ---- control strand -------------------------------------------------
    // Throws auth-failed for an unknown token, invalid-argument without identity.
    HelloResult hello(const std::optional<std::string> &token, const std::optional<std::string> &identifier);
    void record_connection(const PlayerId &player, std::string_view event);
    // Liveness seen by the transport layer; offline starts the grace clock.
    void player_offline(const PlayerId &player);
    void player_online(const PlayerId &player);

    // ---- any thread: client intents, routed to the owning executor -------
    void client_write(const PlayerId &player, const ScopeRef &scope, const std::string &key, ChangeOp op, Value value,
                      Completion done);
    void client_submit(const PlayerId &player, SubmitRequest request, Completion done);

    // ---- administration (blocking; call from outside the executors) -------
    ProtocolId import_protocol(const std::string &yaml, const ActorId &actor);
    BatchId create_batch(const ProtocolId &protocol, const BatchSpec &spec, const ActorId &actor);
    void start_batch(const BatchId &batch, const ActorId &actor);
    void stop_batch(const BatchId &batch, const ActorId &actor);
    void terminate_game(const GameId &game, const ActorId &actor);
    void retire_player(const PlayerId &player, const ActorId &actor);
    void record_export(const BatchId &batch, const Value &details, const ActorId &actor);

    // ---- reads (any thread) ---------------------------------------------
    // Engine state plus attributes and logs, all at one journal offset.
    EngineState snapshot() const;
    template <typename Fn>
    auto with_state(Fn &&fn) const
    {
        std::shared_lock lock(state_mutex_);
        return fn(static_cast<const EngineState &>(state_));
    }
    std::optional<PlayerState> player(const PlayerId &player) const;
    std::optional<GameState> game(const GameId &game) const;
    std::optional<BatchState> batch(const BatchId &batch) const;
    LobbyStatus lobby_status_for(const PlayerId &player) const;

    // player_round / player_stage ref for a member of the owning game.
    ScopeRef resolve_composite(const PlayerId &player, const std::string &round_or_stage) const;

    void check_readable(const ScopeRef &scope) const override;
    void check_writable(const ScopeRef &scope) const override;

private:
    class GameRuntime;
    friend class GameRuntime;

    struct Presence {
        bool online = false;
        std::uint64_t generation = 0;
        std::optional<TimerId> grace_timer;
    };

    struct SlotTimers {
        std::optional<TimerId> deadline;
    };

    TimeMs now() const { return scheduler_.now(); }

    template <typename Apply>
    std::uint64_t commit(EventKind kind, Value body, Apply &&apply)
    {
        return journal_.commit(kind, std::move(body), now(), [&] {
            std::unique_lock lock(state_mutex_);
            apply(state_);
        });
    }

    // Flow step with the journal record; returns the new state.
    PlayerState transition(const PlayerId &player, FlowEvent event, std::optional<std::string> reason = std::nullopt,
                           std::optional<GameId> game = std::nullopt, std::optional<BatchId> batch = std::nullopt);

    GameRuntime &runtime(const GameId &game);
    GameRuntime *find_runtime(const GameId &game);
    std::shared_ptr<Strand> route(const PlayerId &player) const;
    std::optional<GameId> player_state_game(const PlayerId &player) const;
    void ensure_intake() const;

    // control strand
    void control_submit(const PlayerId &player, const SubmitRequest &request);
    void enter_lobby(const PlayerId &player);
    bool seat(const PlayerId &player);
    void seat_waitlist();
    void unseat(const PlayerId &player);
    void arm_slot_timer(const BatchId &batch, const GameId &game, TimeMs deadline);
    void slot_deadline(const BatchId &batch, const GameId &game);
    void launch(const BatchId &batch, const GameId &game);
    void lobby_exit_slot(const BatchId &batch, const GameId &game, const std::string &reason);
    void grace_expired(const PlayerId &player, std::uint64_t generation);
    void game_finished(const GameId &game);
    void check_batch_end(const BatchId &batch);
    void release_waitlist(const std::string &reason);
    void lobby_tick();
    void schedule_lobby_tick();
    void drop_player(const PlayerId &player, const std::string &reason);
    std::vector<BatchId> ordered_batches() const;

    Scheduler &scheduler_;
    Journal &journal_;
    Experiment experiment_;
    std::unique_ptr<TokenSource> tokens_;
    EngineOptions options_;
    EngineListener *listener_ = nullptr;
    AttributeStore store_;
    std::shared_ptr<Strand> control_;

    mutable std::shared_mutex state_mutex_;
    EngineState state_;
    // Serializes check-then-commit of flow steps across executors.
    std::mutex flow_mutex_;

    mutable std::mutex runtimes_mutex_;
    std::map<GameId, std::unique_ptr<GameRuntime>> runtimes_;

    // Control strand only.
    std::map<std::string, PlayerId> by_token_hash_;
    std::map<PlayerId, Presence> presence_;
    std::map<GameId, SlotTimers> slot_timers_;
    bool lobby_tick_armed_ = false;
};

template <typename Fn>
auto Engine::run_sync(const std::shared_ptr<Strand> &strand, Fn &&fn) -> std::invoke_result_t<Fn>
{
    using R = std::invoke_result_t<Fn>;
    if (scheduler_.is_virtual())
        return fn();
    std::promise<R> promise;
    auto future = promise.get_future();
    strand->post([&] {
        try {
            if constexpr (std::is_void_v<R>) {
                fn();
                promise.set_value();
            } else {
                promise.set_value(fn());
            }
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
    });
    return future.get();
}

} // namespace vlab
