// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vlab {

// Uniform delay in [min_ms, max_ms].
struct ThinkTime {
    TimeMs min_ms = 0;
    TimeMs max_ms = 0;

    TimeMs draw(std::mt19937_64 &rng) const;
};

// Scope relative to the bot's current stage.
enum class ScopeSlot { game, round, stage, player, player_round, player_stage };

std::string_view to_string(ScopeSlot slot) noexcept;
std::optional<ScopeSlot> parse_scope_slot(std::string_view text) noexcept;

struct ValueGen {
    enum class Kind { literal, random_int, random_real, choice };
    Kind kind = Kind::literal;
    Value literal;
    double lo = 0;
    double hi = 0;
    std::vector<Value> choices;

    Value draw(std::mt19937_64 &rng) const;
};

struct BotAction {
    enum class Kind { set, append, submit, fuzz };
    Kind kind = Kind::submit;
    ScopeSlot scope = ScopeSlot::player_stage;
    std::string key;
    ValueGen value;
    // fuzz: `count` random set/append intents over `scopes` x `keys`. Appends go
    // to "<key>_list" so the two kinds never collide on one key.
    int count = 0;
    std::vector<ScopeSlot> scopes;
    std::vector<std::string> keys;
    double append_ratio = 0.5;
    ThinkTime gap;
};

// Matches a stage by round index and stage name; absent means any.
struct StageMatch {
    std::optional<int> round;
    std::optional<std::string> stage;

    bool matches(std::size_t round_index, const std::string &stage_name) const;
};

struct StageHandler {
    StageMatch when;
    std::optional<ThinkTime> think;
    std::vector<BotAction> actions;
};

struct DropPlan {
    StageMatch when;
    TimeMs after_ms = 0;
    // Reconnect with the stored token after this long; never when absent.
    std::optional<TimeMs> reconnect_after_ms;
};

struct BotScript {
    std::string name = "bot";
    std::uint64_t seed = 1;
    ThinkTime think;
    std::vector<StageHandler> handlers;
    // Stages without a matching handler still get a plain submit.
    bool submit_unhandled = true;
    bool survey = true;
    // Stop sending anything, heartbeat replies included, from this stage on.
    std::optional<StageMatch> silent;
    std::optional<DropPlan> drop;

    const StageHandler *handler_for(std::size_t round_index, const std::string &stage_name) const;
};

struct BotGroup {
    BotScript script;
    std::size_t count = 1;
};

// One script document, or {bots: [{count: n, ...script}, ...]}. Throws ProtocolError.
std::vector<BotGroup> parse_bot_groups(std::string_view yaml);
BotScript parse_bot_script(std::string_view yaml);

} // namespace vlab
