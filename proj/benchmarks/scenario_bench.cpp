// SPDX-License-Identifier: Apache-2.0
// Whole-game throughput: bots playing one group game on the virtual clock, in process.

#include <benchmark/benchmark.h>

#include "vlab/bots/scenario.hpp"
#include "vlab/bots/script.hpp"
#include "vlab/lifecycle/declarative.hpp"

using namespace vlab;

static ScenarioConfig group_game(int players)
{
    ScenarioConfig config;
    config.protocol_yaml = "factors:\n"
                           "  - {name: playerCount, type: integer, values: [" + std::to_string(players) + "]}\n"
                           "treatments:\n"
                           "  - {name: base, assignments: {playerCount: " + std::to_string(players) + "}}\n"
                           "lobbies:\n"
                           "  - {name: default, timeout: 600, strategy: fail}\n"
                           "batches:\n"
                           "  - {name: main, lobby: default, quotas: [{treatment: base, games: 1}]}\n";
    config.experiment = make_experiment(parse_game_definition(R"(
name: guess
rounds: 10
stages:
  - {name: guess, duration: 60, advance_on_submit: true}
  - {name: outcome, duration: 10}
public_keys: [guess]
)"));
    config.bots = parse_bot_groups(R"(
name: guesser
think: {min: 500, max: 5000}
handlers:
  - stage: guess
    actions:
      - set: {scope: player_round, key: guess, random_real: [0, 1]}
      - submit
)");
    return config;
}

static void BM_VirtualGame(benchmark::State &state)
{
    auto config = group_game(static_cast<int>(state.range(0)));
    std::uint64_t seed = 1;
    for (auto _ : state) {
        config.seed = seed++;
        auto report = run_scenario(config);
        if (!report.completed)
            state.SkipWithError("scenario did not complete");
    }
}
BENCHMARK(BM_VirtualGame)->Arg(2)->Arg(12)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
