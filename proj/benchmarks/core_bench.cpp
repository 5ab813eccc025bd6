// SPDX-License-Identifier: Apache-2.0
// Hot paths on the write and fan-out side: store writes, journal commits,
// frame coding and audience computation.

#include <benchmark/benchmark.h>

#include "vlab/journal/journal.hpp"
#include "vlab/model/attribute_store.hpp"
#include "vlab/sync/visibility.hpp"
#include "vlab/sync/wire.hpp"
#include "vlab/treatments/factorial.hpp"

using namespace vlab;

static void BM_JournalCommit(benchmark::State &state)
{
    Journal journal(std::make_unique<MemoryStorage>());
    Value body{{"scope", "game:g1"}, {"key", "x"}, {"op", "set"}, {"value", 1}, {"version", 1}, {"actor", "p1"}};
    for (auto _ : state)
        benchmark::DoNotOptimize(journal.record(EventKind::attr_change, body, 0));
}
BENCHMARK(BM_JournalCommit);

static void BM_AttributeSet(benchmark::State &state)
{
    Journal journal(std::make_unique<MemoryStorage>());
    AttributeStore store(journal);
    auto scope = ScopeRef::game(GameId("g1"));
    std::int64_t i = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(store.set(scope, "counter", ++i, "p1", i));
}
BENCHMARK(BM_AttributeSet);

// Appends copy the list, so cost grows with its length.
static void BM_AttributeAppend(benchmark::State &state)
{
    Journal journal(std::make_unique<MemoryStorage>());
    AttributeStore store(journal);
    auto scope = ScopeRef::game(GameId("g1"));
    for (std::int64_t i = 0; i < state.range(0); ++i)
        store.append(scope, "chat", "hello", "p1", 0);
    for (auto _ : state) {
        store.append(scope, "chat", "hello", "p1", 0);
        state.PauseTiming();
        store.restore({}, {});
        for (std::int64_t i = 0; i < state.range(0); ++i)
            store.append(scope, "chat", "hello", "p1", 0);
        state.ResumeTiming();
    }
}
BENCHMARK(BM_AttributeAppend)->Arg(10)->Arg(1000);

static void BM_FrameEncode(benchmark::State &state)
{
    Frame f{FrameType::change, 42, Value{{"scope", "player_round:g1.r3:p7"}, {"key", "guess"}, {"value", 0.4375},
                                         {"version", 3}, {"op", "set"}}};
    for (auto _ : state)
        benchmark::DoNotOptimize(encode_frame(f));
}
BENCHMARK(BM_FrameEncode);

static void BM_FrameDecode(benchmark::State &state)
{
    auto text = encode_frame({FrameType::change, 42,
                              Value{{"scope", "player_round:g1.r3:p7"}, {"key", "guess"}, {"value", 0.4375}}});
    for (auto _ : state)
        benchmark::DoNotOptimize(decode_frame(text));
}
BENCHMARK(BM_FrameDecode);

static void BM_Audience(benchmark::State &state)
{
    EngineState s;
    GameState g;
    g.id = GameId("g1");
    g.status = GameStatus::running;
    g.public_keys = {"guess"};
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        PlayerState p;
        p.id = PlayerId("p" + std::to_string(i));
        p.phase = Phase::game;
        p.current_game = g.id;
        g.players.push_back(p.id);
        s.players[p.id] = p;
    }
    s.games[g.id] = g;
    auto scope = ScopeRef::player(PlayerId("p0"));
    for (auto _ : state)
        benchmark::DoNotOptimize(audience(s, scope, "guess"));
}
BENCHMARK(BM_Audience)->Arg(2)->Arg(12)->Arg(64);

static void BM_FactorialExpansion(benchmark::State &state)
{
    std::vector<FactorDef> factors;
    for (int f = 0; f < 4; ++f)
        factors.push_back({"f" + std::to_string(f), FactorType::integer, {1, 2, 3, 4, 5}});
    for (auto _ : state)
        benchmark::DoNotOptimize(expand_factorial(factors));
}
BENCHMARK(BM_FactorialExpansion);

BENCHMARK_MAIN();
