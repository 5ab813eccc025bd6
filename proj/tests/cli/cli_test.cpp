// SPDX-License-Identifier: Apache-2.0
// Runs the vlab binary the way a user would.
#include "config.hpp"
#include "scaffold.hpp"

#include "vlab/common/error.hpp"
#include "vlab/common/value.hpp"

#include <httplib.h>

#include <gtest/gtest.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace vlab::cli {
namespace {

namespace fs = std::filesystem;

struct Run {
    int exit = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string quote(const std::string &arg)
{
    std::string out = "'";
    for (char c : arg)
        out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

class Workspace {
public:
    Workspace()
    {
        static int counter = 0;
        dir_ = fs::temp_directory_path() /
               ("vlab-cli-" + std::to_string(::getpid()) + "-" + std::to_string(++counter));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~Workspace() { fs::remove_all(dir_); }

    const fs::path &dir() const { return dir_; }
    fs::path operator/(const std::string &name) const { return dir_ / name; }

    Run run(const std::vector<std::string> &args, const std::string &env = "") const
    {
        std::string cmd = "cd " + quote(dir_.string()) + " && " + env + " " + quote(VLAB_CLI);
        for (auto &a : args)
            cmd += " " + quote(a);
        // Captured beside the workspace so commands see it exactly as prepared.
        auto out = dir_.string() + ".out", err = dir_.string() + ".err";
        cmd += " > " + quote(out) + " 2> " + quote(err) + " < /dev/null";
        int status = std::system(cmd.c_str());
        Run run{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
        fs::remove(out);
        fs::remove(err);
        return run;
    }

private:
    fs::path dir_;
};

// Exactly one "error: <code>: ..." line, and it is the last thing on stderr.
// Warnings may come before it.
void expect_one_error_line(const Run &run, const std::string &code)
{
    EXPECT_NE(run.exit, 0);
    std::vector<std::string> errors;
    std::istringstream lines(run.err);
    std::string last;
    for (std::string line; std::getline(lines, line); last = line)
        if (line.rfind("error: ", 0) == 0)
            errors.push_back(line);
    ASSERT_EQ(errors.size(), 1u) << run.err;
    EXPECT_EQ(errors[0], last) << run.err;
    EXPECT_EQ(errors[0].rfind("error: " + code + ": ", 0), 0u) << run.err;
    EXPECT_EQ(run.err.back(), '\n');
}

// A `vlab serve` child process.
class Server {
public:
    Server(const Workspace &ws, std::vector<std::string> args)
    {
        int pipe_fd[2];
        EXPECT_EQ(::pipe(pipe_fd), 0);
        pid_ = ::fork();
        if (pid_ == 0) {
            ::dup2(pipe_fd[1], STDOUT_FILENO);
            ::close(pipe_fd[0]);
            if (::chdir(ws.dir().c_str()) != 0)
                ::_exit(127);
            std::vector<std::string> all = {VLAB_CLI, "serve", "--port", "0", "--admin-port", "0"};
            all.insert(all.end(), args.begin(), args.end());
            std::vector<char *> argv;
            for (auto &a : all)
                argv.push_back(a.data());
            argv.push_back(nullptr);
            ::execv(VLAB_CLI, argv.data());
            ::_exit(127);
        }
        ::close(pipe_fd[1]);
        out_ = ::fdopen(pipe_fd[0], "r");
        char line[512];
        while (std::fgets(line, sizeof line, out_)) {
            std::string text = line;
            banner_ += text;
            if (text.rfind("admin http://", 0) == 0) {
                admin_port_ = std::stoi(text.substr(text.rfind(':') + 1));
                break;
            }
        }
    }

    ~Server()
    {
        if (pid_ > 0 && !reaped_) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, nullptr, 0);
        }
        if (out_)
            std::fclose(out_);
    }

    int admin_port() const { return admin_port_; }
    const std::string &banner() const { return banner_; }

    // Returns the exit status.
    int signal(int sig)
    {
        ::kill(pid_, sig);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        reaped_ = true;
        if (WIFEXITED(status))
            return WEXITSTATUS(status);
        return 128 + WTERMSIG(status);
    }

private:
    pid_t pid_ = -1;
    FILE *out_ = nullptr;
    std::string banner_;
    int admin_port_ = 0;
    bool reaped_ = false;
};

TEST(Scaffold, OutputIsDeterministicAndComplete)
{
    Workspace ws;
    scaffold(ws / "a", false);
    scaffold(ws / "b", false);
    std::vector<std::string> names;
    for (auto &entry : fs::directory_iterator(ws / "a")) {
        names.push_back(entry.path().filename().string());
        EXPECT_EQ(slurp(entry.path()), slurp(ws / "b" / entry.path().filename()));
    }
    std::sort(names.begin(), names.end());
    EXPECT_EQ(names, (std::vector<std::string>{"README.md", "bots.yaml", "consent.md", "game.yaml", "intro.md",
                                               "outro.md", "protocol.yaml", "vlab.yaml"}));
    EXPECT_NE(slurp(ws / "a" / "consent.md").find("Consent"), std::string::npos);
}

TEST(Scaffold, RefusesNonEmptyDirectoryWithoutForce)
{
    Workspace ws;
    std::ofstream(ws / "notes.txt") << "mine";
    auto refused = ws.run({"scaffold", "."});
    expect_one_error_line(refused, "conflict");
    EXPECT_FALSE(fs::exists(ws / "protocol.yaml"));

    auto forced = ws.run({"scaffold", ".", "--force"});
    EXPECT_EQ(forced.exit, 0) << forced.err;
    EXPECT_TRUE(fs::exists(ws / "protocol.yaml"));
    EXPECT_EQ(slurp(ws / "notes.txt"), "mine");
}

TEST(Scaffold, SimulatePassesUntouched)
{
    Workspace ws;
    ASSERT_EQ(ws.run({"scaffold", "exp"}).exit, 0);
    auto sim = ws.run({"simulate", "exp", "--seed", "42", "--virtual-clock", "--report", "report.json"});
    EXPECT_EQ(sim.exit, 0) << sim.out << sim.err;
    EXPECT_EQ(sim.out.rfind("PASS", 0), 0u) << sim.out;
    auto report = Value::parse(slurp(ws / "report.json"));
    EXPECT_TRUE(report["passed"].get<bool>());
    EXPECT_TRUE(report["replay_consistent"].get<bool>());
    ASSERT_EQ(report["games"].size(), 2u);
    for (auto &[game, summary] : report["games"].items())
        EXPECT_EQ(summary["status"], "ended") << game;

    // Same seed, same journal.
    ASSERT_EQ(ws.run({"simulate", "exp", "--seed", "42", "--report", "r1.json", "--journal", "j1"}).exit, 0);
    ASSERT_EQ(ws.run({"simulate", "exp", "--seed", "42", "--report", "r2.json", "--journal", "j2"}).exit, 0);
    EXPECT_EQ(slurp(ws / "j1"), slurp(ws / "j2"));
}

TEST(Validate, ScaffoldIsValid)
{
    Workspace ws;
    ASSERT_EQ(ws.run({"scaffold", "."}).exit, 0);
    auto ok = ws.run({"validate", "."});
    EXPECT_EQ(ok.exit, 0) << ok.err;
    EXPECT_NE(ok.out.find("ok: ./protocol.yaml"), std::string::npos) << ok.out;
    EXPECT_EQ(ws.run({"validate", "protocol.yaml"}).exit, 0);
}

TEST(Validate, OutOfRangeValueNamesTheFactorAndLine)
{
    Workspace ws;
    std::ofstream(ws / "p.yaml") << "factors:\n"
                                    "  - {name: playerCount, type: integer, values: [2]}\n"
                                    "  - {name: feedback, type: string, values: [none, self]}\n"
                                    "treatments:\n"
                                    "  - {name: ok, assignments: {playerCount: 2, feedback: none}}\n"
                                    "  - {name: bad, assignments: {playerCount: 2, feedback: ranked}}\n";
    auto run = ws.run({"validate", "p.yaml"});
    expect_one_error_line(run, "validation-error");
    EXPECT_NE(run.err.find("p.yaml:6:"), std::string::npos) << run.err;
    EXPECT_NE(run.err.find("feedback"), std::string::npos) << run.err;

    std::ofstream(ws / "broken.yaml") << "factors: [\n";
    expect_one_error_line(ws.run({"validate", "broken.yaml"}), "parse-error");
    expect_one_error_line(ws.run({"validate", "missing.yaml"}), "io-error");
}

TEST(Validate, ChecksTheWholeProject)
{
    Workspace ws;
    ASSERT_EQ(ws.run({"scaffold", "."}).exit, 0);
    std::ofstream(ws / "game.yaml", std::ios::app) << "surprise: 1\n";
    auto run = ws.run({"validate", "."});
    expect_one_error_line(run, "validation-error");
    EXPECT_NE(run.err.find("game.yaml"), std::string::npos) << run.err;
}

TEST(Config, FlagsBeatEnvBeatFileBeatDefaults)
{
    Settings file{{"port", "9001"}, {"admin_port", "9002"}, {"journal", "/data/file.journal"}, {"threads", "2"}};
    Settings env{{"port", "9101"}, {"admin_port", "9102"}};
    Settings flags{{"port", "9201"}};
    auto config = resolve_config(file, env, flags);
    EXPECT_EQ(config.port, 9201);
    EXPECT_EQ(config.admin_port, 9102);
    EXPECT_EQ(config.journal, "/data/file.journal");
    EXPECT_EQ(config.threads, 2);
    EXPECT_EQ(config.host, "127.0.0.1");
    EXPECT_EQ(config.sources["port"], "flag");
    EXPECT_EQ(config.sources["admin_port"], "env");
    EXPECT_EQ(config.sources["journal"], "file");
    EXPECT_EQ(config.sources["host"], "default");
    auto recorded = config.to_value();
    EXPECT_EQ(recorded["sources"]["port"], "flag");

    EXPECT_THROW(resolve_config({}, {}, {{"port", "eighty"}}), Error);
    EXPECT_THROW(resolve_config({}, {{"threads", "0"}}, {}), Error);
}

TEST(Config, EnvironmentNamesAndFileRelativePaths)
{
    std::map<std::string, std::string> vars{{"VLAB_ADMIN_PORT", "7000"},
                                            {"VLAB_JOURNAL", "j.log"},
                                            {"VLAB_HEARTBEAT_INTERVAL_S", "2"},
                                            {"VLAB_HEARTBEAT_MISSES", "4"},
                                            {"HOME", "/"}};
    auto env = env_settings([&](const char *name) -> const char * {
        auto it = vars.find(name);
        return it == vars.end() ? nullptr : it->second.c_str();
    });
    EXPECT_EQ(env, (Settings{{"admin_port", "7000"},
                             {"heartbeat_interval_s", "2"},
                             {"heartbeat_misses", "4"},
                             {"journal", "j.log"}}));
    auto config = resolve_config({}, env, {});
    EXPECT_EQ(config.heartbeat_s, 2);
    EXPECT_EQ(config.heartbeat_misses, 4);

    Workspace ws;
    fs::create_directories(ws / "conf");
    std::ofstream(ws / "conf" / "vlab.yaml") << "journal: data/run.journal\nport: 1234\n";
    auto file = read_config_file(ws / "conf" / "vlab.yaml");
    EXPECT_EQ(file["journal"], (ws / "conf" / "data" / "run.journal").string());
    EXPECT_EQ(file["port"], "1234");

    std::ofstream(ws / "conf" / "bad.yaml") << "port: 1\nprot: 2\n";
    try {
        read_config_file(ws / "conf" / "bad.yaml");
        FAIL() << "unknown key accepted";
    } catch (const Error &e) {
        EXPECT_NE(std::string(e.what()).find("bad.yaml:2:"), std::string::npos) << e.what();
    }
}

TEST(Serve, HealthzAndCleanShutdown)
{
    Workspace ws;
    ASSERT_EQ(ws.run({"scaffold", "."}).exit, 0);
    Server server(ws, {"--config", "vlab.yaml"});
    ASSERT_GT(server.admin_port(), 0) << server.banner();
    httplib::Client client("127.0.0.1", server.admin_port());
    auto res = client.Get("/healthz");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(server.signal(SIGTERM), 0);

    // Startup configuration is the first journal record, with its sources.
    std::ifstream journal(ws / "vlab.journal");
    std::string header, first;
    std::getline(journal, header);
    std::getline(journal, first);
    auto record = Value::parse(first);
    EXPECT_EQ(record["body"]["verb"], "configure");
    EXPECT_EQ(record["body"]["config"]["sources"]["port"], "flag");
    EXPECT_EQ(record["body"]["config"]["sources"]["game"], "file");
}

TEST(Serve, PortInUseIsAStartupError)
{
    Workspace ws;
    httplib::Server blocker;
    int port = blocker.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    auto run = ws.run({"serve", "--port", "0", "--admin-port", std::to_string(port)});
    expect_one_error_line(run, "io-error");
    auto ws_run = ws.run({"serve", "--port", std::to_string(port), "--admin-port", "0"});
    expect_one_error_line(ws_run, "io-error");
}

TEST(Serve, AcknowledgedActionsSurviveKill)
{
    Workspace ws;
    ASSERT_EQ(ws.run({"scaffold", "."}).exit, 0);
    ASSERT_EQ(ws.run({"admin-user", "--config", "vlab.yaml", "add", "ada"}, "VLAB_ADMIN_PASSWORD=longenough").exit, 0);
    EXPECT_EQ(slurp(ws / "accounts.yaml").find("longenough"), std::string::npos);

    std::string protocol_id, batch_id;
    {
        Server server(ws, {"--config", "vlab.yaml"});
        httplib::Client client("127.0.0.1", server.admin_port());
        auto login = client.Post("/api/login", R"({"user":"ada","password":"longenough"})", "application/json");
        ASSERT_TRUE(login && login->status == 200);
        httplib::Headers auth{{"Authorization", "Bearer " + Value::parse(login->body)["token"].get<std::string>()}};
        auto imported = client.Post("/api/protocols", auth, slurp(ws / "protocol.yaml"), "application/yaml");
        ASSERT_EQ(imported->status, 201);
        protocol_id = Value::parse(imported->body)["id"];
        auto created = client.Post("/api/batches", auth,
                                   Value{{"protocol", protocol_id}, {"batch", "pilot"}}.dump(), "application/json");
        ASSERT_EQ(created->status, 201);
        batch_id = Value::parse(created->body)["id"];
        ASSERT_EQ(client.Post("/api/batches/" + batch_id + "/start", auth, "", "application/json")->status, 200);
        EXPECT_EQ(server.signal(SIGKILL), 128 + SIGKILL);
    }

    Server restarted(ws, {"--config", "vlab.yaml"});
    // configure, import, create, start.
    EXPECT_NE(restarted.banner().find("restored 4 records"), std::string::npos) << restarted.banner();
    httplib::Client client("127.0.0.1", restarted.admin_port());
    auto login = client.Post("/api/login", R"({"user":"ada","password":"longenough"})", "application/json");
    ASSERT_TRUE(login && login->status == 200);
    httplib::Headers auth{{"Authorization", "Bearer " + Value::parse(login->body)["token"].get<std::string>()}};
    EXPECT_EQ(client.Get("/api/protocols/" + protocol_id, auth)->body, slurp(ws / "protocol.yaml"));
    auto batch = Value::parse(client.Get("/api/batches/" + batch_id, auth)->body);
    EXPECT_EQ(batch["status"], "running");
    EXPECT_EQ(batch["games"]["total"], 2);
    EXPECT_EQ(client.Post("/api/batches/" + batch_id + "/start", auth, "", "application/json")->status, 409);
}

TEST(Export, RedactsByDefault)
{
    Workspace ws;
    ASSERT_EQ(ws.run({"scaffold", "."}).exit, 0);
    ASSERT_EQ(ws.run({"simulate", ".", "--seed", "5", "--journal", "run.journal"}).exit, 0);
    auto report = Value::parse(slurp(ws / "simulation-report.json"));

    auto run = ws.run({"export", "--journal", "run.journal", "--batch", "b1", "--format", "csv", "--out", "csv"});
    ASSERT_EQ(run.exit, 0) << run.err;
    std::string all;
    for (auto &entry : fs::directory_iterator(ws / "csv"))
        all += slurp(entry.path());
    EXPECT_NE(all.find("player_rounds"), std::string::npos);
    ASSERT_EQ(report["bots"].size(), 4u);
    for (auto &bot : report["bots"])
        EXPECT_EQ(all.find(bot["bot"].get<std::string>()), std::string::npos);

    ASSERT_EQ(ws.run({"export", "--journal", "run.journal", "--batch", "b1", "--format", "jsonl",
                      "--include-identifiers", "--out", "ids"})
                  .exit,
              0);
    std::string with_ids;
    for (auto &entry : fs::directory_iterator(ws / "ids"))
        with_ids += slurp(entry.path());
    EXPECT_NE(with_ids.find(report["bots"][0]["bot"].get<std::string>()), std::string::npos);

    expect_one_error_line(ws.run({"export", "--journal", "run.journal", "--batch", "b9"}), "not-found");
    auto usage = ws.run({"export", "--journal", "run.journal", "--batch", "b1", "--format", "xlsx"});
    expect_one_error_line(usage, "usage");
}

} // namespace
} // namespace vlab::cli
