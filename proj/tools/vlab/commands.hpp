// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "config.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

namespace vlab::cli {

// A protocol file, or a project directory whose protocol.yaml, game.yaml,
// bots.yaml and vlab.yaml are checked when present. Throws Error whose message
// starts with "<file>:<line>:" when a position is known.
void validate_command(const std::filesystem::path &path, std::ostream &out);

struct SimulateOptions {
    std::filesystem::path dir = ".";
    std::optional<std::filesystem::path> protocol;
    std::optional<std::filesystem::path> game;
    std::optional<std::filesystem::path> bots;
    std::optional<std::string> batch;
    std::uint64_t seed = 1;
    bool real_clock = false;
    // Real sockets on loopback; implies the real clock.
    bool websocket = false;
    std::optional<double> deadline_s;
    std::filesystem::path report = "simulation-report.json";
    std::optional<std::filesystem::path> journal;
};

// Returns true when the scenario passed.
bool simulate_command(const SimulateOptions &options, std::ostream &out);

struct ExportCommand {
    std::filesystem::path journal;
    std::string batch;
    std::string format = "csv";
    bool include_identifiers = false;
    bool partial = false;
    std::optional<std::filesystem::path> out;
};

void export_command(const ExportCommand &command, std::ostream &out, std::ostream &err);

// Serves until wait() returns.
void serve_command(const ServerConfig &config, std::ostream &out, std::ostream &err,
                   const std::function<void()> &wait);

void admin_user_add(const std::filesystem::path &accounts, const std::string &name, const std::string &password,
                    std::ostream &out);
void admin_user_remove(const std::filesystem::path &accounts, const std::string &name, std::ostream &out);
void admin_user_list(const std::filesystem::path &accounts, std::ostream &out);

std::string read_text_file(const std::filesystem::path &path);

} // namespace vlab::cli
