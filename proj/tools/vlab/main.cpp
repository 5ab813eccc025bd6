// SPDX-License-Identifier: Apache-2.0
// vlab: scaffold, validate, serve, simulate and export experiments.
#include "commands.hpp"
#include "config.hpp"
#include "scaffold.hpp"

#include "vlab/common/error.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>

#include <pthread.h>
#include <unistd.h>

namespace {

using namespace vlab;
using namespace vlab::cli;

// Every failure is one line on stderr: "error: <code>: <message>".
int report_error(std::string_view code, std::string message)
{
    for (auto &c : message)
        if (c == '\n' || c == '\r')
            c = ' ';
    std::cerr << "error: " << code << ": " << message << std::endl;
    return 1;
}

std::string read_password()
{
    if (const char *env = std::getenv("VLAB_ADMIN_PASSWORD"))
        return env;
    if (isatty(STDIN_FILENO))
        std::cerr << "password: " << std::flush;
    std::string password;
    std::getline(std::cin, password);
    return password;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Orchestration server for synchronous multi-participant online experiments", "vlab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "vlab 0.1.0");

    // scaffold
    auto *scaffold_cmd = app.add_subcommand("scaffold", "Create a runnable starter experiment");
    std::string scaffold_dir;
    bool force = false;
    scaffold_cmd->add_option("dir", scaffold_dir, "Target directory (empty or absent)")->required();
    scaffold_cmd->add_flag("--force", force, "Write into a non-empty directory, overwriting scaffold files");

    // validate
    auto *validate_cmd = app.add_subcommand("validate", "Check a protocol file or a project directory");
    std::string validate_path = ".";
    validate_cmd->add_option("path", validate_path, "protocol.yaml or project directory");

    // simulate
    auto *simulate_cmd = app.add_subcommand("simulate", "Play an experiment with scripted bots");
    SimulateOptions sim;
    std::string sim_dir = ".", sim_report = "simulation-report.json";
    std::string sim_protocol, sim_game, sim_bots, sim_batch, sim_journal;
    double sim_deadline = 0;
    bool virtual_clock = false;
    simulate_cmd->add_option("dir", sim_dir, "Project directory with protocol.yaml, game.yaml and bots.yaml");
    simulate_cmd->add_option("--protocol", sim_protocol, "Protocol file");
    simulate_cmd->add_option("--game", sim_game, "Game definition file");
    simulate_cmd->add_option("--bots", sim_bots, "Bot script file");
    simulate_cmd->add_option("--batch", sim_batch, "Batch name from the protocol (default: the first)");
    simulate_cmd->add_option("--seed", sim.seed, "Seed for bots, assignment and tokens");
    auto *virtual_flag = simulate_cmd->add_flag("--virtual-clock", virtual_clock, "Simulated time (default)");
    simulate_cmd->add_flag("--real-clock", sim.real_clock, "Wall-clock time")->excludes(virtual_flag);
    simulate_cmd->add_flag("--websocket", sim.websocket, "Connect bots over loopback sockets (real clock)")
        ->excludes(virtual_flag);
    simulate_cmd->add_option("--deadline", sim_deadline, "Give up after this many (virtual) seconds");
    simulate_cmd->add_option("--report", sim_report, "Report file (JSON)");
    simulate_cmd->add_option("--journal", sim_journal, "Write the run's journal to this file");

    // serve
    auto *serve_cmd = app.add_subcommand("serve", "Run the player WebSocket and admin HTTP servers");
    std::string config_path;
    std::map<std::string, std::string> flag_values;
    serve_cmd->add_option("--config", config_path, "Server config file (YAML)");
    for (const auto &key : config_keys()) {
        std::string name = "--" + key;
        for (auto &c : name)
            if (c == '_')
                c = '-';
        serve_cmd->add_option(name, flag_values[key], "Overrides '" + key + "' from env and config file");
    }

    // export
    auto *export_cmd = app.add_subcommand("export", "Export a batch from the journal");
    ExportCommand exp;
    std::string export_config, export_journal, export_out;
    export_cmd->add_option("--batch", exp.batch, "Batch id, e.g. b1")->required();
    export_cmd->add_option("--format", exp.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    export_cmd->add_flag("--include-identifiers", exp.include_identifiers, "Keep external participant identifiers");
    export_cmd->add_flag("--partial", exp.partial, "Allow a batch that has not finished");
    export_cmd->add_option("--journal", export_journal, "Journal file (default from config)");
    export_cmd->add_option("--config", export_config, "Server config file naming the journal");
    export_cmd->add_option("--out", export_out, "Output directory (default export-<batch>)");

    // admin-user
    auto *admin_cmd = app.add_subcommand("admin-user", "Manage admin accounts");
    admin_cmd->require_subcommand(1);
    std::string accounts_path, account_name;
    admin_cmd->add_option("--accounts", accounts_path, "Accounts file (default from config)");
    admin_cmd->add_option("--config", config_path, "Server config file naming the accounts file");
    auto *add_cmd = admin_cmd->add_subcommand("add", "Add an account or reset its password");
    add_cmd->add_option("name", account_name)->required();
    auto *remove_cmd = admin_cmd->add_subcommand("remove", "Delete an account");
    remove_cmd->add_option("name", account_name)->required();
    auto *list_cmd = admin_cmd->add_subcommand("list", "List account names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        report_error("usage", e.what());
        return 2;
    }

    auto env = env_settings([](const char *name) { return std::getenv(name); });
    auto server_config = [&](const std::string &path) {
        Settings file = path.empty() ? Settings{} : read_config_file(path);
        Settings flags;
        for (const auto &[key, value] : flag_values)
            if (!value.empty())
                flags[key] = value;
        return resolve_config(file, env, flags);
    };

    try {
        if (*scaffold_cmd) {
            for (const auto &path : scaffold(scaffold_dir, force))
                std::cout << "created " << path.string() << "\n";
            std::cout << "next: vlab validate " << scaffold_dir << " && vlab simulate " << scaffold_dir << "\n";
        } else if (*validate_cmd) {
            validate_command(validate_path, std::cout);
        } else if (*simulate_cmd) {
            sim.dir = sim_dir;
            if (!sim_protocol.empty())
                sim.protocol = sim_protocol;
            if (!sim_game.empty())
                sim.game = sim_game;
            if (!sim_bots.empty())
                sim.bots = sim_bots;
            if (!sim_batch.empty())
                sim.batch = sim_batch;
            if (sim_deadline > 0)
                sim.deadline_s = sim_deadline;
            if (!sim_journal.empty())
                sim.journal = sim_journal;
            sim.report = sim_report;
            if (!simulate_command(sim, std::cout))
                return report_error("scenario-failed", "the simulation did not pass; see " + sim_report);
        } else if (*serve_cmd) {
            auto config = server_config(config_path);
            // Block the signals before any thread starts so only sigwait sees them.
            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);
            serve_command(config, std::cout, std::cerr, [&] {
                int received = 0;
                sigwait(&signals, &received);
            });
        } else if (*export_cmd) {
            exp.journal = export_journal.empty() ? server_config(export_config).journal : export_journal;
            if (!export_out.empty())
                exp.out = export_out;
            export_command(exp, std::cout, std::cerr);
        } else if (*admin_cmd) {
            auto path = accounts_path.empty() ? server_config(config_path).accounts : accounts_path;
            if (*add_cmd)
                admin_user_add(path, account_name, read_password(), std::cout);
            else if (*remove_cmd)
                admin_user_remove(path, account_name, std::cout);
            else if (*list_cmd)
                admin_user_list(path, std::cout);
        }
    } catch (const Error &e) {
        return report_error(to_string(e.code()), std::string(e.message()));
    } catch (const std::exception &e) {
        return report_error("internal", e.what());
    }
    return 0;
}
