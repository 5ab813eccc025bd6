// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/ids.hpp"
#include "vlab/common/value.hpp"
#include "vlab/model/attribute_store.hpp"
#include "vlab/model/scope.hpp"
#include "vlab/treatments/treatment.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlab {

enum class DisconnectMode { continue_without, cancel_trial, pause_trial, custom };

std::string_view to_string(DisconnectMode mode) noexcept;
std::optional<DisconnectMode> parse_disconnect_mode(std::string_view text) noexcept;

struct DisconnectPolicy {
    DisconnectMode mode = DisconnectMode::continue_without;
    // Seconds a dead or closed connection may stay away before the policy fires.
    int grace_s = 30;
};

struct StageSpec {
    std::string name;
    std::optional<int> duration_s;
    bool advance_on_submit = false;
};

// Handle given to server-side callbacks. Valid only for the duration of the call,
// which always runs on the game's executor.
class GameContext {
public:
    virtual ~GameContext() = default;

    virtual const GameId &game_id() const = 0;
    virtual const Treatment &treatment() const = 0;
    // Active roster in launch order.
    virtual std::vector<PlayerId> players() const = 0;
    virtual TimeMs now() const = 0;

    virtual std::size_t round_count() const = 0;
    virtual std::optional<std::size_t> round_index() const = 0;
    virtual std::optional<std::size_t> stage_index() const = 0;
    virtual std::optional<std::string> stage_name() const = 0;

    // Structure may only be declared during on_game_init.
    virtual std::size_t add_round() = 0;
    virtual void add_stage(std::size_t round, StageSpec stage) = 0;

    virtual std::optional<Value> get(const ScopeRef &scope, const std::string &key) const = 0;
    virtual std::uint64_t set(const ScopeRef &scope, const std::string &key, Value value) = 0;
    virtual std::uint64_t append(const ScopeRef &scope, const std::string &key, Value element) = 0;
    virtual void log(const ScopeRef &scope, const std::string &name, Value payload) = 0;
    // Lets game-mates see this key on each other's player and composite scopes.
    virtual void publish(const std::string &key) = 0;

    // Ends the current stage with reason "policy" once the running callback returns.
    virtual void end_stage() = 0;
    // Takes the player out of the active roster; their data stays.
    virtual void remove_player(const PlayerId &player) = 0;
    virtual void cancel(const std::string &reason) = 0;
    virtual void pause() = 0;
    virtual void resume() = 0;

    ScopeRef game_scope() const { return ScopeRef::game(game_id()); }
    // Scopes at the callback's cursor; throw scope-not-found before the first stage.
    ScopeRef round_scope() const;
    ScopeRef stage_scope() const;
    ScopeRef player_round(const PlayerId &player) const;
    ScopeRef player_stage(const PlayerId &player) const;
};

struct Callbacks {
    using Hook = std::function<void(GameContext &)>;

    Hook on_game_init;
    Hook on_round_start;
    Hook on_stage_start;
    Hook on_stage_end;
    Hook on_round_end;
    Hook on_game_end;
    // Runs after a client write commits and before it reaches other clients.
    std::function<void(GameContext &, const ChangeEvent &)> on_change;
    // Handler for DisconnectMode::custom.
    std::function<void(GameContext &, const PlayerId &)> on_disconnect;
};

struct Experiment {
    std::string name = "experiment";
    Callbacks callbacks;
    DisconnectPolicy disconnect;
    // Intro pages a player submits before reaching the lobby.
    std::size_t intro_steps = 1;
};

// Throws validation-error for a custom policy without handler or negative grace.
void validate_experiment(const Experiment &experiment);

// Structure used when on_game_init declares nothing: one round, one stage that
// advances once everyone submits.
std::vector<std::vector<StageSpec>> default_structure();

} // namespace vlab
