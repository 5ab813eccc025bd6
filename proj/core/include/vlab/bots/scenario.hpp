// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/bots/bot.hpp"
#include "vlab/bots/script.hpp"
#include "vlab/lifecycle/experiment.hpp"
#include "vlab/model/engine_state.hpp"
#include "vlab/sync/hub.hpp"
#include "vlab/treatments/protocol.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vlab {

enum class ClockKind { virtual_clock, real_clock };

struct ScenarioConfig {
    std::string protocol_yaml;
    Experiment experiment;
    // Defaults to the protocol's first batch, else one game per treatment.
    std::optional<BatchSpec> batch;
    // A group with count 0 takes every seat the other groups leave.
    std::vector<BotGroup> bots;
    std::uint64_t seed = 1;
    ClockKind clock = ClockKind::virtual_clock;
    // Virtual or wall milliseconds, depending on the clock.
    TimeMs deadline_ms = 24 * 3600 * 1000;
    HubOptions hub;
    // Worker threads for the real clock.
    std::size_t workers = 4;
    // Journal to this file instead of memory.
    std::optional<std::filesystem::path> journal_path;
    // Delay between consecutive bot arrivals.
    TimeMs arrival_gap_ms = 0;
    // Builds the bots' connector to the hub; in-process loopback when empty. The
    // connector must keep its transport alive and is dropped before the hub.
    std::function<Connector(Hub &)> transport;
};

struct BotReport {
    std::string identifier;
    std::string player;
    // Session secret the bot last held.
    std::string token;
    std::string script;
    std::string phase;
    std::string reason;
    bool done = false;
    bool connected = false;
    std::size_t welcomes = 0;
    std::vector<std::string> stages_acted;
    std::vector<std::string> violations;
    std::vector<BotError> errors;
    std::vector<TranscriptEntry> transcript;
    ClientView view;
};

struct ScenarioReport {
    BatchId batch;
    bool completed = false;
    std::vector<std::string> failures;
    std::map<GameId, std::string> game_status;
    // Hook trace per game in tokens init, rs, ss, se, re, ge.
    std::map<GameId, std::vector<std::string>> hook_traces;
    std::vector<BotReport> bots;

    bool replay_consistent = false;
    // Every connected bot's view equals what the server lets it see.
    bool converged = false;
    std::vector<std::string> divergences;
    // No bot saw a sequence or version regression.
    bool ordered = false;

    std::uint64_t journal_records = 0;
    // Journal file contents.
    std::string journal_text;
    EngineState final_state;

    std::size_t latency_samples = 0;
    double latency_p50_ms = 0;
    double latency_p95_ms = 0;
    double latency_max_ms = 0;

    TimeMs clock_ms = 0;
    double wall_s = 0;

    bool passed() const;
    Value to_value() const;
    std::string summary() const;
};

ScenarioReport run_scenario(const ScenarioConfig &config);

// init (rs (ss se)+ re)+ ge, optionally with an exact round count.
bool hook_trace_matches(const std::vector<std::string> &trace, std::optional<std::size_t> rounds = std::nullopt);

// Batch used when a scenario names none.
BatchSpec default_scenario_batch(const Protocol &protocol);

} // namespace vlab
