// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include "vlab/admin/admin_server.hpp"
#include "vlab/bots/scenario.hpp"
#include "vlab/bots/script.hpp"
#include "vlab/journal/export.hpp"
#include "vlab/journal/replay.hpp"
#include "vlab/lifecycle/declarative.hpp"
#include "vlab/net/ws_client.hpp"
#include "vlab/net/ws_server.hpp"
#include "vlab/runtime/thread_scheduler.hpp"
#include "vlab/sync/hub.hpp"
#include "vlab/treatments/protocol.hpp"

#include <fstream>
#include <sstream>

namespace vlab::cli {

namespace fs = std::filesystem;

namespace {

// Runs fn and re-raises document errors with the file name in front.
template <typename Fn>
auto in_file(const fs::path &path, Fn &&fn)
{
    try {
        return fn();
    } catch (const ProtocolError &e) {
        auto where = path.string() + (e.line() > 0 ? ":" + std::to_string(e.line()) : std::string());
        throw Error(e.code(), where + ": " + e.detail());
    } catch (const Error &e) {
        throw Error(e.code(), path.string() + ": " + std::string(e.message()));
    }
}

std::vector<std::string> read_lines(const fs::path &path)
{
    std::ifstream in(path);
    if (!in)
        fail(Errc::io_error, "cannot read " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
        lines.push_back(line);
    return lines;
}

} // namespace

std::string read_text_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::io_error, "cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void validate_command(const fs::path &path, std::ostream &out)
{
    bool project = fs::is_directory(path);
    auto protocol_path = project ? path / "protocol.yaml" : path;
    auto protocol = in_file(protocol_path, [&] { return parse_protocol(read_text_file(protocol_path)); });
    out << "ok: " << protocol_path.string() << ": " << protocol.factors.size() << " factors, "
        << protocol.treatments.size() << " treatments, " << protocol.lobbies.size() << " lobbies, "
        << protocol.batches.size() << " batches\n";
    if (!project)
        return;

    auto game_path = path / "game.yaml";
    if (fs::exists(game_path)) {
        auto def = in_file(game_path, [&] { return parse_game_definition(read_text_file(game_path)); });
        if (def.rounds_factor && !protocol.factor(*def.rounds_factor))
            fail(Errc::validation_error,
                 game_path.string() + ": rounds factor '" + *def.rounds_factor + "' is not declared in the protocol");
        out << "ok: " << game_path.string() << "\n";
    }
    auto bots_path = path / "bots.yaml";
    if (fs::exists(bots_path)) {
        auto groups = in_file(bots_path, [&] { return parse_bot_groups(read_text_file(bots_path)); });
        out << "ok: " << bots_path.string() << ": " << groups.size() << " bot groups\n";
    }
    auto config_path = path / "vlab.yaml";
    if (fs::exists(config_path)) {
        try {
            resolve_config(read_config_file(config_path), {}, {});
        } catch (const Error &e) {
            auto message = std::string(e.message());
            if (message.rfind(config_path.string(), 0) != 0)
                message = config_path.string() + ": " + message;
            throw Error(e.code(), message);
        }
        out << "ok: " << config_path.string() << "\n";
    }
}

bool simulate_command(const SimulateOptions &options, std::ostream &out)
{
    auto protocol_path = options.protocol.value_or(options.dir / "protocol.yaml");
    auto game_path = options.game.value_or(options.dir / "game.yaml");
    auto bots_path = options.bots.value_or(options.dir / "bots.yaml");

    ScenarioConfig config;
    config.protocol_yaml = read_text_file(protocol_path);
    auto protocol = in_file(protocol_path, [&] { return parse_protocol(config.protocol_yaml); });
    if (fs::exists(game_path) || options.game)
        config.experiment =
            in_file(game_path, [&] { return make_experiment(parse_game_definition(read_text_file(game_path))); });
    config.bots = in_file(bots_path, [&] { return parse_bot_groups(read_text_file(bots_path)); });
    if (options.batch) {
        auto *batch = protocol.batch(*options.batch);
        if (!batch)
            fail(Errc::not_found, protocol_path.string() + ": no batch named '" + *options.batch + "'");
        config.batch = *batch;
    }
    config.seed = options.seed;
    config.clock = options.real_clock || options.websocket ? ClockKind::real_clock : ClockKind::virtual_clock;
    if (options.deadline_s)
        config.deadline_ms = static_cast<TimeMs>(*options.deadline_s * 1000);
    else if (config.clock == ClockKind::real_clock)
        config.deadline_ms = 600'000;
    if (options.websocket)
        config.transport = websocket_transport();
    config.journal_path = options.journal;

    auto report = run_scenario(config);
    {
        std::ofstream file(options.report, std::ios::trunc);
        file << report.to_value().dump(2) << "\n";
        if (!file)
            fail(Errc::io_error, "cannot write " + options.report.string());
    }
    out << report.summary() << "report: " << options.report.string() << "\n";
    return report.passed();
}

void export_command(const ExportCommand &command, std::ostream &out, std::ostream &err)
{
    auto format = parse_export_format(command.format);
    if (!format)
        fail(Errc::invalid_argument, "format must be csv or jsonl, got '" + command.format + "'");
    auto journal = read_journal(read_lines(command.journal));
    auto replayed = replay(journal);
    if (replayed.diagnostic)
        err << "warning: " << command.journal.string() << ": " << *replayed.diagnostic << "; using the first "
            << replayed.applied << " records\n";

    ExportOptions options;
    options.format = *format;
    options.include_identifiers = command.include_identifiers;
    options.partial = command.partial;
    auto bundle = export_batch(replayed.state, BatchId(command.batch), options);
    auto dir = command.out.value_or(fs::path("export-" + command.batch));
    write_bundle(bundle, dir);
    out << "exported batch " << command.batch << " (" << bundle.files.size() << " files"
        << (command.include_identifiers ? ", identifiers included" : "") << ") to " << dir.string() << "\n";
}

void serve_command(const ServerConfig &config, std::ostream &out, std::ostream &err,
                   const std::function<void()> &wait)
{
    Experiment experiment;
    if (!config.game.empty())
        experiment = in_file(config.game, [&] { return make_experiment(parse_game_definition(read_text_file(config.game))); });
    auto accounts = in_file(config.accounts, [&] { return AccountStore::load(config.accounts); });
    if (accounts.size() == 0)
        err << "warning: no admin accounts in " << config.accounts
            << "; the admin API stays locked until one is added with 'vlab admin-user add'\n";

    ThreadScheduler scheduler(static_cast<std::size_t>(config.threads));
    Journal journal(std::make_unique<FileStorage>(config.journal, config.fsync));
    auto replayed = replay(journal.read());
    if (replayed.diagnostic)
        fail(Errc::journal_failure, config.journal + ": " + *replayed.diagnostic);

    Engine engine(scheduler, journal, std::move(experiment), std::make_unique<SecureTokenSource>());
    if (replayed.applied > 0)
        engine.restore(replayed.state);
    engine.record_configuration(config.to_value());

    HubOptions hub_options;
    hub_options.heartbeat.interval_s = config.heartbeat_s;
    hub_options.heartbeat.misses_allowed = config.heartbeat_misses;
    Hub hub(engine, hub_options);
    engine.set_listener(&hub);

    AdminServerOptions admin_options;
    admin_options.address = config.host;
    admin_options.port = config.admin_port;
    if (!config.static_dir.empty())
        admin_options.static_dir = config.static_dir;
    AdminServer admin(engine, std::move(accounts), admin_options);
    hub.set_downstream(&admin);

    WsServerOptions ws_options;
    ws_options.address = config.host;
    ws_options.port = static_cast<std::uint16_t>(config.port);
    ws_options.threads = static_cast<std::size_t>(std::max(1, config.threads / 2));
    WsServer ws(hub, ws_options);

    auto shutdown = [&] {
        ws.stop();
        admin.stop();
        hub.stop();
        engine.set_listener(nullptr);
        scheduler.stop();
    };
    try {
        ws.start();
        admin.start();
    } catch (...) {
        shutdown();
        throw;
    }
    out << "restored " << replayed.applied << " records from " << config.journal << "\n"
        << "play ws://" << config.host << ":" << ws.port() << "/play\n"
        << "admin http://" << config.host << ":" << admin.port() << "/\n"
        << std::flush;
    wait();
    out << "shutting down\n" << std::flush;
    shutdown();
}

void admin_user_add(const fs::path &accounts, const std::string &name, const std::string &password, std::ostream &out)
{
    auto store = in_file(accounts, [&] { return AccountStore::load(accounts); });
    bool existed = store.contains(name);
    store.set_password(name, password);
    store.save(accounts);
    out << (existed ? "updated " : "added ") << name << " in " << accounts.string() << "\n";
}

void admin_user_remove(const fs::path &accounts, const std::string &name, std::ostream &out)
{
    auto store = in_file(accounts, [&] { return AccountStore::load(accounts); });
    if (!store.remove(name))
        fail(Errc::not_found, "no account named " + name);
    store.save(accounts);
    out << "removed " << name << "\n";
}

void admin_user_list(const fs::path &accounts, std::ostream &out)
{
    auto store = in_file(accounts, [&] { return AccountStore::load(accounts); });
    for (const auto &name : store.names())
        out << name << "\n";
}

} // namespace vlab::cli
