// SPDX-License-Identifier: Apache-2.0
#include "scenarios.hpp"

#include "vlab/journal/journal.hpp"
#include "vlab/net/ws_client.hpp"
#include "vlab/net/ws_server.hpp"
#include "vlab/runtime/thread_scheduler.hpp"

#include <httplib.h>

#include <gtest/gtest.h>

namespace vlab {
namespace {

using namespace test;

TEST(WebSocket, BotsPlayAGameOverRealSockets)
{
    ScenarioConfig config;
    config.protocol_yaml = group_protocol(3, 1);
    config.experiment = make_experiment(parse_game_definition(R"(
rounds: 2
stages:
  - {name: play, duration: 30, advance_on_submit: true}
public_keys: [k0]
)"));
    config.bots = parse_bot_groups(R"(
name: net
think: {min: 5, max: 30}
handlers:
  - actions:
      - fuzz: {count: 10, scopes: [game, stage, player, player_round], keys: [k0, k1], gap: {min: 0, max: 5}}
      - submit
)");
    config.clock = ClockKind::real_clock;
    config.deadline_ms = 30'000;
    config.transport = websocket_transport();
    auto report = run_scenario(config);
    ASSERT_TRUE(report.passed()) << report.summary();
    EXPECT_TRUE(report.converged);
    EXPECT_TRUE(report.replay_consistent);
    EXPECT_EQ(report.game_status.begin()->second, "ended");
    EXPECT_GT(report.latency_samples, 0u);
}

struct Server {
    ThreadScheduler scheduler{2};
    Journal journal{std::make_unique<MemoryStorage>()};
    Engine engine{scheduler, journal, Experiment{}, std::make_unique<SecureTokenSource>()};
    Hub hub{engine};
    WsServer ws{hub};

    Server() { ws.start(); }
    ~Server()
    {
        ws.stop();
        scheduler.stop();
    }
};

TEST(WebSocket, PlainHttpIsRefused)
{
    Server server;
    httplib::Client client("127.0.0.1", server.ws.port());
    auto wrong = client.Get("/elsewhere");
    ASSERT_TRUE(wrong);
    EXPECT_EQ(wrong->status, 404);
    auto plain = client.Get("/play");
    ASSERT_TRUE(plain);
    EXPECT_EQ(plain->status, 426);
}

TEST(WebSocket, PortInUseIsAnError)
{
    Server first;
    WsServerOptions options;
    options.port = first.ws.port();
    WsServer second(first.hub, options);
    try {
        second.start();
        FAIL() << "second bind succeeded";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::io_error);
    }
}

} // namespace
} // namespace vlab
