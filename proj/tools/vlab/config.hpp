// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace vlab::cli {

// Raw key -> text settings from one source.
using Settings = std::map<std::string, std::string>;

struct ServerConfig {
    std::string host = "127.0.0.1";
    // Player WebSocket.
    int port = 8081;
    int admin_port = 8080;
    std::string journal = "vlab.journal";
    bool fsync = false;
    std::string accounts = "accounts.yaml";
    // Declarative game file; the built-in one-stage game when empty.
    std::string game;
    std::string static_dir;
    int threads = 4;
    int heartbeat_s = 5;
    int heartbeat_misses = 3;

    // Where each value came from: flag, env, file or default.
    std::map<std::string, std::string> sources;

    Value to_value() const;
};

// Keys accepted in every source.
const std::vector<std::string> &config_keys();

// Flat YAML map in the protocol dialect. Relative paths resolve against the
// file's directory. Throws validation-error naming the file and line.
Settings read_config_file(const std::filesystem::path &path);

// VLAB_<KEY> variables, e.g. VLAB_ADMIN_PORT.
Settings env_settings(const std::function<const char *(const char *)> &getenv);

// Later layers win: defaults < file < env < flags.
ServerConfig resolve_config(const Settings &file, const Settings &env, const Settings &flags);

} // namespace vlab::cli
