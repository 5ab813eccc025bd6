// SPDX-License-Identifier: Apache-2.0
#include "engine_fixture.hpp"

#include <gtest/gtest.h>

using namespace vlab;
using namespace vlab::test;

namespace {

Experiment two_by_two(std::vector<std::string> *trace, std::optional<int> duration = std::nullopt)
{
    Experiment e;
    auto hook = [trace](const char *name) {
        return [trace, name](GameContext &) { trace->push_back(name); };
    };
    e.callbacks.on_game_init = [trace, duration](GameContext &ctx) {
        trace->push_back("init");
        for (int r = 0; r < 2; ++r) {
            auto round = ctx.add_round();
            ctx.add_stage(round, {"a", duration, true});
            ctx.add_stage(round, {"b", duration, true});
        }
    };
    e.callbacks.on_round_start = hook("rs");
    e.callbacks.on_stage_start = hook("ss");
    e.callbacks.on_stage_end = hook("se");
    e.callbacks.on_round_end = hook("re");
    e.callbacks.on_game_end = hook("ge");
    return e;
}

} // namespace

TEST(Engine, HelloCreatesPlayerInConsent)
{
    EngineFixture f(Experiment{});
    auto hello = f.engine->hello(std::nullopt, "w123");
    EXPECT_TRUE(hello.created);
    EXPECT_GE(hello.token.size(), 32u);
    auto p = f.engine->player(hello.player);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->phase, Phase::consent);
    EXPECT_EQ(p->status, PlayerStatus::new_player);
}

TEST(Engine, GarbageTokenIsRejectedWithoutCreatingPlayer)
{
    EngineFixture f(Experiment{});
    EXPECT_THROW(f.engine->hello(std::string("nonsense"), std::nullopt), Error);
    EXPECT_TRUE(f.engine->snapshot().players.empty());
}

TEST(Engine, TokenResumesSamePlayer)
{
    EngineFixture f(Experiment{});
    auto first = f.engine->hello(std::nullopt, "w1");
    auto again = f.engine->hello(first.token, std::nullopt);
    EXPECT_EQ(again.player, first.player);
    EXPECT_TRUE(again.resumed);
    EXPECT_EQ(f.engine->snapshot().players.size(), 1u);
}

TEST(Engine, SameIdentifierRotatesToken)
{
    EngineFixture f(Experiment{});
    auto first = f.engine->hello(std::nullopt, "w1");
    auto second = f.engine->hello(std::nullopt, "w1");
    EXPECT_EQ(second.player, first.player);
    EXPECT_NE(second.token, first.token);
    EXPECT_THROW(f.engine->hello(first.token, std::nullopt), Error);
    EXPECT_NO_THROW(f.engine->hello(second.token, std::nullopt));
}

TEST(Engine, DefaultGameRunsToOutro)
{
    EngineFixture f(Experiment{});
    auto batch = f.start(small_protocol(2), batch_of(1));
    auto a = f.arrive("a");
    EXPECT_EQ(f.engine->player(a)->phase, Phase::lobby);
    EXPECT_EQ(f.engine->lobby_status_for(a).players_needed, 1u);
    auto b = f.arrive("b");
    auto game = *f.engine->player(a)->current_game;
    EXPECT_EQ(f.engine->player(b)->phase, Phase::game);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::running);

    auto stage = f.current_stage(game);
    EXPECT_EQ(f.submit(a, SubmitStep::stage, stage), nullptr);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::running);
    EXPECT_EQ(f.submit(a, SubmitStep::stage, stage), nullptr);
    EXPECT_EQ(f.submit(b, SubmitStep::stage, stage), nullptr);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::ended);
    EXPECT_EQ(f.engine->player(a)->phase, Phase::outro);
    EXPECT_EQ(f.engine->player(a)->reason, "completed");
    EXPECT_EQ(f.engine->batch(batch)->status, BatchStatus::ended);
    EXPECT_EQ(f.submit(a, SubmitStep::survey), nullptr);
    EXPECT_EQ(f.engine->player(a)->phase, Phase::exited);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, HookOrderForTwoByTwoGame)
{
    std::vector<std::string> trace;
    EngineFixture f(two_by_two(&trace));
    f.start(small_protocol(1), batch_of(1));
    auto a = f.arrive("a");
    auto game = *f.engine->player(a)->current_game;
    for (int i = 0; i < 4; ++i)
        ASSERT_EQ(f.submit(a, SubmitStep::stage, f.current_stage(game)), nullptr);
    std::vector<std::string> expected{"init", "rs", "ss", "se", "ss", "se", "re",
                                      "rs",   "ss", "se", "ss", "se", "re", "ge"};
    EXPECT_EQ(trace, expected);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, TimerAdvancesStages)
{
    std::vector<std::string> trace;
    EngineFixture f(two_by_two(&trace, 60));
    f.start(small_protocol(1), batch_of(1));
    auto a = f.arrive("a");
    auto game = *f.engine->player(a)->current_game;
    auto started = f.scheduler.now();
    f.scheduler.run_until([&] { return is_terminal(f.engine->game(game)->status); }, started + 10 * 60'000);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::ended);
    EXPECT_EQ(f.scheduler.now(), started + 4 * 60'000);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, StaleStageSubmitIsRejected)
{
    std::vector<std::string> trace;
    EngineFixture f(two_by_two(&trace));
    f.start(small_protocol(1), batch_of(1));
    auto a = f.arrive("a");
    auto game = *f.engine->player(a)->current_game;
    auto first = f.current_stage(game);
    f.submit(a, SubmitStep::stage, first);
    EXPECT_EQ(error_code(f.submit(a, SubmitStep::stage, first)), "stale-stage");
}

TEST(Engine, InitFailureCancelsWithoutRoundHooks)
{
    std::vector<std::string> trace;
    Experiment e;
    e.callbacks.on_game_init = [](GameContext &) { throw std::runtime_error("boom"); };
    e.callbacks.on_round_start = [&](GameContext &) { trace.push_back("rs"); };
    EngineFixture f(std::move(e));
    f.start(small_protocol(1), batch_of(1));
    auto a = f.arrive("a");
    auto game = *f.engine->player(a)->current_game;
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::cancelled);
    EXPECT_TRUE(trace.empty());
    EXPECT_EQ(f.engine->player(a)->phase, Phase::outro);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, LobbyTimeoutFailSendsPlayersToOutro)
{
    EngineFixture f(Experiment{});
    f.start(small_protocol(12, "fail", 60), batch_of(1));
    std::vector<PlayerId> players;
    for (int i = 0; i < 5; ++i)
        players.push_back(f.arrive("w" + std::to_string(i)));
    f.scheduler.advance_to(f.scheduler.now() + 61'000);
    for (auto &p : players) {
        auto state = f.engine->player(p);
        EXPECT_EQ(state->phase, Phase::outro);
        EXPECT_EQ(state->reason, "lobby_timeout");
    }
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, LobbyExtendThenFail)
{
    EngineFixture f(Experiment{});
    f.start(small_protocol(3, "extend", 60), batch_of(1));
    auto a = f.arrive("a");
    auto t0 = f.scheduler.now();
    f.scheduler.advance_to(t0 + 60'500);
    EXPECT_EQ(f.engine->player(a)->phase, Phase::lobby);
    f.scheduler.advance_to(t0 + 120'500);
    EXPECT_EQ(f.engine->player(a)->phase, Phase::outro);
    EXPECT_EQ(f.engine->player(a)->reason, "lobby_timeout");
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, LobbyStartAnywayLaunchesWithPresentPlayers)
{
    EngineFixture f(Experiment{});
    f.start(small_protocol(3, "start_anyway", 60), batch_of(1));
    auto a = f.arrive("a");
    auto b = f.arrive("b");
    f.scheduler.advance_to(f.scheduler.now() + 60'500);
    auto game = f.engine->player(a)->current_game;
    ASSERT_TRUE(game);
    EXPECT_EQ(f.engine->game(*game)->players.size(), 2u);
    EXPECT_EQ(f.engine->player(b)->phase, Phase::game);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, CompleteAssignmentFillsInOrderAndWaitlists)
{
    EngineFixture f(Experiment{});
    f.start(small_protocol(2), batch_of(2));
    std::vector<PlayerId> players;
    for (int i = 0; i < 5; ++i)
        players.push_back(f.arrive("w" + std::to_string(i)));
    EXPECT_EQ(f.engine->player(players[0])->current_game, f.engine->player(players[1])->current_game);
    EXPECT_EQ(f.engine->player(players[2])->current_game, f.engine->player(players[3])->current_game);
    EXPECT_NE(f.engine->player(players[0])->current_game, f.engine->player(players[2])->current_game);
    auto snapshot = f.engine->snapshot();
    ASSERT_EQ(snapshot.waitlist.size(), 1u);
    EXPECT_EQ(snapshot.waitlist[0], players[4]);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, ContinueWithoutShrinksRoster)
{
    Experiment e;
    e.disconnect = {DisconnectMode::continue_without, 30};
    EngineFixture f(std::move(e));
    f.start(small_protocol(3), batch_of(1));
    auto a = f.arrive("a");
    auto b = f.arrive("b");
    auto c = f.arrive("c");
    auto game = *f.engine->player(a)->current_game;
    auto stage = f.current_stage(game);
    f.engine->player_offline(c);
    f.scheduler.advance_to(f.scheduler.now() + 31'000);
    EXPECT_EQ(f.engine->game(game)->active_players().size(), 2u);
    EXPECT_EQ(f.engine->player(c)->status, PlayerStatus::dropped);
    f.submit(a, SubmitStep::stage, stage);
    f.submit(b, SubmitStep::stage, stage);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::ended);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, CancelTrialSendsEveryoneToOutro)
{
    Experiment e;
    e.disconnect = {DisconnectMode::cancel_trial, 30};
    EngineFixture f(std::move(e));
    f.start(small_protocol(3), batch_of(1));
    auto a = f.arrive("a");
    auto b = f.arrive("b");
    auto c = f.arrive("c");
    auto game = *f.engine->player(a)->current_game;
    f.engine->player_offline(c);
    f.scheduler.advance_to(f.scheduler.now() + 31'000);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::cancelled);
    for (auto &p : {a, b}) {
        EXPECT_EQ(f.engine->player(p)->phase, Phase::outro);
        EXPECT_EQ(f.engine->player(p)->reason, "cancelled");
    }
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, ReconnectWithinGraceKeepsPlayer)
{
    Experiment e;
    e.disconnect = {DisconnectMode::cancel_trial, 30};
    EngineFixture f(std::move(e));
    f.start(small_protocol(2), batch_of(1));
    auto a = f.arrive("a");
    f.arrive("b");
    auto game = *f.engine->player(a)->current_game;
    f.engine->player_offline(a);
    f.scheduler.advance_to(f.scheduler.now() + 20'000);
    f.engine->player_online(a);
    f.scheduler.advance_to(f.scheduler.now() + 60'000);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::running);
}

TEST(Engine, PausePreservesRemainingStageTime)
{
    Experiment e;
    e.disconnect = {DisconnectMode::pause_trial, 10};
    e.callbacks.on_game_init = [](GameContext &ctx) { ctx.add_stage(ctx.add_round(), {"timed", 120, false}); };
    EngineFixture f(std::move(e));
    f.start(small_protocol(2), batch_of(1));
    auto a = f.arrive("a");
    auto b = f.arrive("b");
    auto game = *f.engine->player(a)->current_game;
    auto t0 = f.scheduler.now();
    f.scheduler.advance_to(t0 + 20'000);
    f.engine->player_offline(b);
    f.scheduler.advance_to(t0 + 30'000);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::paused);
    EXPECT_EQ(f.engine->game(game)->paused_remaining_ms, 90'000);
    f.scheduler.advance_to(t0 + 60'000);
    f.engine->player_online(b);
    f.settle();
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::running);
    EXPECT_EQ(*f.engine->game(game)->current_stage()->deadline, t0 + 60'000 + 90'000);
    f.scheduler.advance_to(t0 + 60'000 + 89'999);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::running);
    f.scheduler.advance_to(t0 + 60'000 + 90'000);
    EXPECT_EQ(f.engine->game(game)->status, GameStatus::ended);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, StopBatchTerminatesGames)
{
    EngineFixture f(Experiment{});
    auto batch = f.start(small_protocol(1), batch_of(3));
    std::vector<PlayerId> players;
    for (int i = 0; i < 3; ++i)
        players.push_back(f.arrive("w" + std::to_string(i)));
    f.engine->stop_batch(batch, "admin:test");
    f.settle();
    EXPECT_EQ(f.engine->batch(batch)->status, BatchStatus::terminated);
    for (auto &p : players) {
        auto state = f.engine->player(p);
        EXPECT_EQ(state->phase, Phase::outro);
        EXPECT_EQ(state->reason, "terminated");
        EXPECT_EQ(f.engine->game(*state->current_game)->status, GameStatus::cancelled);
    }
    EXPECT_THROW(f.engine->start_batch(batch, "admin:test"), Error);
    EXPECT_TRUE(f.replay_matches());
}

TEST(Engine, WritesRespectScopesAndGameClosure)
{
    EngineFixture f(Experiment{});
    f.start(small_protocol(2), batch_of(1));
    auto a = f.arrive("a");
    auto b = f.arrive("b");
    auto game = *f.engine->player(a)->current_game;
    EXPECT_EQ(f.write(a, ScopeRef::game(game), "topology", "dynamic"), nullptr);
    EXPECT_EQ(f.engine->store().find(ScopeRef::game(game), "topology")->version, 1u);
    EXPECT_EQ(error_code(f.write(a, ScopeRef::player(b), "x", 1)), "forbidden");
    EXPECT_EQ(error_code(f.write(a, ScopeRef::game(GameId("g99")), "x", 1)), "scope-not-found");
    auto stage = f.current_stage(game);
    f.submit(a, SubmitStep::stage, stage);
    f.submit(b, SubmitStep::stage, stage);
    EXPECT_EQ(error_code(f.write(a, ScopeRef::game(game), "topology", "static")), "game-closed");
    EXPECT_TRUE(f.replay_matches());
}
