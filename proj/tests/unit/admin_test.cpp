// SPDX-License-Identifier: Apache-2.0
#include "scenarios.hpp"

#include "vlab/admin/admin_server.hpp"
#include "vlab/journal/journal.hpp"
#include "vlab/runtime/thread_scheduler.hpp"

#include <httplib.h>

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <thread>

namespace vlab {
namespace {

using namespace std::chrono_literals;

const char *password = "correct horse battery";

AccountStore one_admin()
{
    AccountStore accounts;
    accounts.set_password("ada", password, 2000);
    return accounts;
}

// Reads /api/events into a buffer on its own thread.
class EventReader {
public:
    EventReader(int port, std::string token) : client_("127.0.0.1", port)
    {
        client_.set_read_timeout(60, 0);
        thread_ = std::thread([this, token] {
            client_.Get("/api/events?access_token=" + token, [this](const char *data, std::size_t size) {
                std::lock_guard lock(mutex_);
                text_.append(data, size);
                changed_.notify_all();
                return true;
            });
        });
    }

    ~EventReader() { join(); }

    void join()
    {
        if (thread_.joinable()) {
            client_.stop();
            thread_.join();
        }
    }

    // Waits until every fragment appears in one data line.
    bool wait_for(std::vector<std::string> fragments, std::chrono::milliseconds timeout = 10s)
    {
        std::unique_lock lock(mutex_);
        return changed_.wait_for(lock, timeout, [&] {
            std::size_t pos = 0;
            while ((pos = text_.find("data: ", pos)) != std::string::npos) {
                auto end = text_.find('\n', pos);
                auto line = text_.substr(pos, end - pos);
                bool all = true;
                for (auto &f : fragments)
                    all = all && line.find(f) != std::string::npos;
                if (all)
                    return true;
                pos = end;
            }
            return false;
        });
    }

    std::string text()
    {
        std::lock_guard lock(mutex_);
        return text_;
    }

private:
    httplib::Client client_;
    std::thread thread_;
    std::mutex mutex_;
    std::condition_variable changed_;
    std::string text_;
};

struct Fixture {
    std::atomic<TimeMs> wall{1'000'000};
    ThreadScheduler scheduler{2};
    Journal journal{std::make_unique<MemoryStorage>()};
    Engine engine{scheduler, journal, make_experiment(parse_game_definition(R"(
rounds: 1
stages:
  - {name: play, duration: 60, advance_on_submit: true}
)")),
                  std::make_unique<SecureTokenSource>()};
    AdminServer admin;
    httplib::Client http;

    explicit Fixture(AdminServerOptions options = {})
        : admin(engine, one_admin(), with_clock(options)), http("127.0.0.1", (admin.start(), admin.port()))
    {
        engine.set_listener(&admin);
    }

    AdminServerOptions with_clock(AdminServerOptions options)
    {
        options.session_ttl_ms = 60'000;
        options.clock = [this] { return wall.load(); };
        return options;
    }

    ~Fixture()
    {
        engine.set_listener(nullptr);
        admin.stop();
        scheduler.stop();
    }

    std::string login()
    {
        auto res = http.Post("/api/login", Value{{"user", "ada"}, {"password", password}}.dump(), "application/json");
        EXPECT_TRUE(res && res->status == 200);
        return Value::parse(res->body)["token"].get<std::string>();
    }

    httplib::Headers auth(const std::string &token) { return {{"Authorization", "Bearer " + token}}; }

    PlayerId join(const std::string &identifier)
    {
        auto hello = engine.run_sync(engine.control(), [&] { return engine.hello(std::nullopt, identifier); });
        submit(hello.player, SubmitRequest{SubmitStep::consent, std::nullopt});
        submit(hello.player, SubmitRequest{SubmitStep::intro, std::nullopt});
        return hello.player;
    }

    void submit(const PlayerId &player, SubmitRequest request)
    {
        std::promise<std::exception_ptr> done;
        engine.client_submit(player, std::move(request), [&](std::exception_ptr e) { done.set_value(e); });
        auto error = done.get_future().get();
        if (error)
            std::rethrow_exception(error);
    }
};

TEST(Accounts, SaltedHashesRoundTrip)
{
    auto dir = std::filesystem::temp_directory_path() / "vlab-accounts-test";
    std::filesystem::create_directories(dir);
    auto path = dir / "accounts.yaml";
    AccountStore accounts;
    accounts.set_password("ada", password, 2000);
    accounts.set_password("bob", password, 2000);
    accounts.save(path);

    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(text.find(password), std::string::npos);

    auto loaded = AccountStore::load(path);
    EXPECT_EQ(loaded.size(), 2u);
    EXPECT_TRUE(loaded.verify("ada", password));
    EXPECT_FALSE(loaded.verify("ada", "correct horse battery!"));
    EXPECT_FALSE(loaded.verify("eve", password));
    // Same password, different salt.
    auto ada = text.find("name: ada"), bob = text.find("name: bob");
    ASSERT_NE(ada, std::string::npos);
    ASSERT_NE(bob, std::string::npos);
    EXPECT_NE(text.substr(text.find("hash:", ada), 80), text.substr(text.find("hash:", bob), 80));
    std::filesystem::remove_all(dir);

    EXPECT_THROW(accounts.set_password("ada", "short"), Error);
    EXPECT_THROW(accounts.set_password("bad name", password), Error);
    EXPECT_EQ(AccountStore::load(dir / "missing.yaml").size(), 0u);
}

TEST(AdminApi, HealthzNeedsNoToken)
{
    Fixture f;
    auto res = f.http.Get("/healthz");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
}

TEST(AdminApi, AuthenticationBoundaries)
{
    Fixture f;
    auto bad = f.http.Post("/api/login", Value{{"user", "ada"}, {"password", "nope"}}.dump(), "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 401);
    auto unknown = f.http.Post("/api/login", Value{{"user", "eve"}, {"password", password}}.dump(), "application/json");
    EXPECT_EQ(unknown->status, 401);

    EXPECT_EQ(f.http.Get("/api/batches")->status, 401);
    EXPECT_EQ(f.http.Get("/api/events")->status, 401);

    auto token = f.login();
    EXPECT_EQ(f.http.Get("/api/batches", f.auth(token))->status, 200);

    // A player's session secret is not an admin token.
    auto hello = f.engine.run_sync(f.engine.control(), [&] { return f.engine.hello(std::nullopt, "worker-1"); });
    ASSERT_FALSE(hello.token.empty());
    EXPECT_EQ(f.http.Get("/api/batches", f.auth(hello.token))->status, 401);
    EXPECT_EQ(f.http.Get("/api/batches", f.auth("adm_" + hello.token))->status, 401);

    // Expiry.
    f.wall += 59'000;
    EXPECT_EQ(f.http.Get("/api/batches", f.auth(token))->status, 200);
    f.wall += 2'000;
    EXPECT_EQ(f.http.Get("/api/batches", f.auth(token))->status, 401);

    auto again = f.login();
    EXPECT_EQ(f.http.Post("/api/logout", f.auth(again), "", "application/json")->status, 204);
    EXPECT_EQ(f.http.Get("/api/batches", f.auth(again))->status, 401);
}

TEST(AdminApi, ProtocolImportRoundTripsAndReportsLines)
{
    Fixture f;
    auto token = f.login();
    auto yaml = test::group_protocol(3, 2);
    auto res = f.http.Post("/api/protocols", f.auth(token), yaml, "application/yaml");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 201) << res->body;
    auto id = Value::parse(res->body)["id"].get<std::string>();
    auto back = f.http.Get("/api/protocols/" + id, f.auth(token));
    EXPECT_EQ(back->status, 200);
    EXPECT_EQ(back->body, yaml);
    EXPECT_EQ(f.http.Get("/api/protocols/pr-nothing", f.auth(token))->status, 404);

    auto broken = f.http.Post("/api/protocols", f.auth(token),
                              "factors:\n  - {name: n, type: integer, values: [1]}\ntreatments:\n"
                              "  - {name: t, assignments: {n: 7}}\n",
                              "application/yaml");
    EXPECT_EQ(broken->status, 400);
    auto error = Value::parse(broken->body);
    EXPECT_EQ(error["error"], "validation-error");
    EXPECT_NE(error["message"].get<std::string>().find("n"), std::string::npos);
}

TEST(AdminApi, BatchLifecycleAndLiveEvents)
{
    Fixture f;
    auto token = f.login();
    EventReader events(f.admin.port(), token);
    ASSERT_TRUE(events.wait_for({"offset"}));

    auto imported = f.http.Post("/api/protocols", f.auth(token), test::group_protocol(3, 2), "application/yaml");
    auto protocol = Value::parse(imported->body)["id"].get<std::string>();
    ASSERT_TRUE(events.wait_for({"\"protocol\":\"" + protocol + "\""}));

    EXPECT_EQ(f.http.Post("/api/batches", f.auth(token), Value{{"protocol", "pr-nothing"}, {"batch", "main"}}.dump(),
                          "application/json")
                  ->status,
              404);
    auto created = f.http.Post("/api/batches", f.auth(token), Value{{"protocol", protocol}, {"batch", "main"}}.dump(),
                               "application/json");
    ASSERT_EQ(created->status, 201) << created->body;
    auto batch = Value::parse(created->body)["id"].get<std::string>();
    EXPECT_EQ(Value::parse(created->body)["status"], "created");
    EXPECT_EQ(f.http.Get("/api/batches/nope", f.auth(token))->status, 404);

    auto start = f.http.Post("/api/batches/" + batch + "/start", f.auth(token), "", "application/json");
    ASSERT_EQ(start->status, 200) << start->body;
    ASSERT_TRUE(events.wait_for({"\"batch\":\"" + batch + "\"", "\"status\":\"running\""}));
    EXPECT_EQ(f.http.Post("/api/batches/" + batch + "/start", f.auth(token), "", "application/json")->status, 409);

    // Three players fill the first game.
    std::vector<PlayerId> players;
    for (int i = 0; i < 3; ++i)
        players.push_back(f.join("worker-" + std::to_string(i)));
    ASSERT_TRUE(events.wait_for({"\"game\":\"g1\"", "\"status\":\"running\""}));

    auto summary = Value::parse(f.http.Get("/api/batches/" + batch, f.auth(token))->body);
    EXPECT_EQ(summary["games"]["running"], 1);
    EXPECT_EQ(summary["games"]["pending"], 1);
    EXPECT_EQ(summary["players"]["game"], 3);
    int games = 0, people = 0;
    for (auto &[k, v] : summary["games"].items())
        games += k == "total" ? 0 : v.get<int>();
    for (auto &[k, v] : summary["players"].items())
        people += k == "total" ? 0 : v.get<int>();
    EXPECT_EQ(games, summary["games"]["total"].get<int>());
    EXPECT_EQ(people, summary["players"]["total"].get<int>());

    // Live batches export only as partial.
    EXPECT_EQ(f.http.Get("/api/batches/" + batch + "/export", f.auth(token))->status, 409);
    EXPECT_EQ(f.http.Get("/api/batches/" + batch + "/export?partial=1", f.auth(token))->status, 200);

    for (auto &p : players)
        f.submit(p, SubmitRequest{SubmitStep::stage, StageId("g1.r0.s0")});
    ASSERT_TRUE(events.wait_for({"\"game\":\"g1\"", "\"status\":\"ended\""}));
    ASSERT_TRUE(events.wait_for({"\"player\":\"" + players[0].str() + "\"", "\"phase\":\"outro\""}));

    auto game = Value::parse(f.http.Get("/api/games/g1", f.auth(token))->body);
    EXPECT_EQ(game["status"], "ended");
    EXPECT_EQ(f.http.Get("/api/games/g99", f.auth(token))->status, 404);

    // A waiting player, then the second game is terminated under them.
    auto late = f.join("worker-late");
    ASSERT_TRUE(events.wait_for({"\"game\":\"g2\"", "\"seated\":1"}));
    auto term = f.http.Post("/api/games/g2/terminate", f.auth(token), "", "application/json");
    ASSERT_EQ(term->status, 200) << term->body;
    EXPECT_EQ(Value::parse(term->body)["status"], "cancelled");
    ASSERT_TRUE(events.wait_for({"\"game\":\"g2\"", "\"status\":\"cancelled\""}));
    ASSERT_TRUE(events.wait_for({"\"player\":\"" + late.str() + "\"", "\"reason\":\"terminated\""}));
    EXPECT_EQ(f.http.Post("/api/games/g2/terminate", f.auth(token), "", "application/json")->status, 409);

    // Both games are over, so the batch ended by itself.
    ASSERT_TRUE(events.wait_for({"\"batch\":\"" + batch + "\"", "\"status\":\"ended\""}));
    EXPECT_EQ(f.http.Post("/api/batches/" + batch + "/stop", f.auth(token), "", "application/json")->status, 409);

    auto exported = f.http.Get("/api/batches/" + batch + "/export", f.auth(token));
    ASSERT_EQ(exported->status, 200);
    EXPECT_EQ(exported->body.find("worker-"), std::string::npos);
    auto with_ids = f.http.Get("/api/batches/" + batch + "/export?include_identifiers=1", f.auth(token));
    EXPECT_NE(with_ids->body.find("worker-0"), std::string::npos);

    // Every admin change was journaled with the acting admin.
    std::set<std::string> verbs;
    for (auto &record : f.journal.read().records)
        if (record.kind == EventKind::admin_action) {
            EXPECT_EQ(record.body["actor"], "admin:ada");
            verbs.insert(record.body["verb"].get<std::string>());
        }
    EXPECT_EQ(verbs, (std::set<std::string>{"import_protocol", "create_batch", "start_batch", "terminate_game",
                                            "export"}));
    events.join();
}

TEST(AdminApi, StopCancelsLiveGames)
{
    Fixture f;
    auto token = f.login();
    auto imported = f.http.Post("/api/protocols", f.auth(token), test::group_protocol(1, 3), "application/yaml");
    auto protocol = Value::parse(imported->body)["id"].get<std::string>();
    auto created = f.http.Post("/api/batches", f.auth(token), Value{{"protocol", protocol}, {"batch", "main"}}.dump(),
                               "application/json");
    auto batch = Value::parse(created->body)["id"].get<std::string>();
    f.http.Post("/api/batches/" + batch + "/start", f.auth(token), "", "application/json");
    std::vector<PlayerId> players;
    for (int i = 0; i < 3; ++i)
        players.push_back(f.join("solo-" + std::to_string(i)));
    auto summary = Value::parse(f.http.Get("/api/batches/" + batch, f.auth(token))->body);
    ASSERT_EQ(summary["games"]["running"], 3) << summary.dump();

    auto stop = f.http.Post("/api/batches/" + batch + "/stop", f.auth(token), "", "application/json");
    ASSERT_EQ(stop->status, 200) << stop->body;
    auto after = Value::parse(stop->body);
    EXPECT_EQ(after["status"], "terminated");
    EXPECT_EQ(after["games"]["cancelled"], 3);
    for (auto &p : players) {
        auto player = Value::parse(f.http.Get("/api/players/" + p.str(), f.auth(token))->body);
        EXPECT_EQ(player["phase"], "outro");
        EXPECT_EQ(player["reason"], "terminated");
        EXPECT_FALSE(player.contains("token_hash"));
    }
    EXPECT_EQ(f.http.Post("/api/batches/" + batch + "/start", f.auth(token), "", "application/json")->status, 409);
}

TEST(AdminApi, StaticPages)
{
    Fixture f;
    for (std::string page : {"/admin/", "/play-ui/"}) {
        auto res = f.http.Get(page);
        ASSERT_TRUE(res);
        EXPECT_EQ(res->status, 200);
        EXPECT_NE(res->body.find("<html"), std::string::npos);
    }
    EXPECT_EQ(f.http.Get("/admin")->status, 302);

    auto dir = std::filesystem::temp_directory_path() / "vlab-static-test";
    std::filesystem::create_directories(dir / "admin");
    std::ofstream(dir / "admin" / "index.html") << "<html>built console</html>";
    AdminServerOptions options;
    options.static_dir = dir;
    Fixture g(options);
    auto res = g.http.Get("/admin/");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->body, "<html>built console</html>");
    // No build for the player client there, so the fallback stays.
    EXPECT_EQ(g.http.Get("/play-ui/")->status, 200);
    std::filesystem::remove_all(dir);
}

TEST(AdminApi, PortInUseIsAnError)
{
    Fixture f;
    AdminServerOptions options;
    options.port = f.admin.port();
    AdminServer second(f.engine, one_admin(), options);
    EXPECT_THROW(second.start(), Error);
}

} // namespace
} // namespace vlab
