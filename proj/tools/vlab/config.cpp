// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include "vlab/common/error.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>

namespace vlab::cli {

namespace {

const std::vector<std::string> path_keys = {"journal", "accounts", "game", "static_dir"};

int to_int(const std::string &key, const std::string &text, int lo, int hi)
{
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(text, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || used != text.size() || value < lo || value > hi)
        fail(Errc::validation_error,
             key + " must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got '" + text + "'");
    return value;
}

bool to_bool(const std::string &key, const std::string &text)
{
    if (text == "true" || text == "1" || text == "yes" || text == "on")
        return true;
    if (text == "false" || text == "0" || text == "no" || text == "off")
        return false;
    fail(Errc::validation_error, key + " must be true or false, got '" + text + "'");
}

[[noreturn]] void bad_config(const std::filesystem::path &path, int line, Errc code, const std::string &message)
{
    fail(code, path.string() + ":" + std::to_string(line) + ": " + message);
}

} // namespace

const std::vector<std::string> &config_keys()
{
    static const std::vector<std::string> keys = {"host",    "port",      "admin_port", "journal",
                                                  "fsync",   "accounts",  "game",       "static_dir",
                                                  "threads", "heartbeat_interval_s", "heartbeat_misses"};
    return keys;
}

Value ServerConfig::to_value() const
{
    return Value{{"host", host},
                 {"port", port},
                 {"admin_port", admin_port},
                 {"journal", journal},
                 {"fsync", fsync},
                 {"accounts", accounts},
                 {"game", game},
                 {"static_dir", static_dir},
                 {"threads", threads},
                 {"heartbeat_interval_s", heartbeat_s},
                 {"heartbeat_misses", heartbeat_misses},
                 {"sources", sources}};
}

Settings read_config_file(const std::filesystem::path &path)
{
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile &) {
        fail(Errc::io_error, "cannot read " + path.string());
    } catch (const YAML::Exception &e) {
        bad_config(path, e.mark.line + 1, Errc::parse_error, e.msg);
    }
    Settings out;
    if (root.IsNull())
        return out;
    if (!root.IsMap())
        bad_config(path, root.Mark().line + 1, Errc::validation_error, "config must be a mapping");
    auto base = path.parent_path();
    for (const auto &entry : root) {
        auto key = entry.first.as<std::string>();
        auto line = entry.first.Mark().line + 1;
        auto &keys = config_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            bad_config(path, line, Errc::validation_error, "unknown config key '" + key + "'");
        if (!entry.second.IsScalar())
            bad_config(path, line, Errc::validation_error, key + " must be a scalar");
        auto value = entry.second.as<std::string>();
        if (std::find(path_keys.begin(), path_keys.end(), key) != path_keys.end() && !value.empty() &&
            std::filesystem::path(value).is_relative())
            value = (base / value).lexically_normal().string();
        out[key] = value;
    }
    return out;
}

Settings env_settings(const std::function<const char *(const char *)> &getenv)
{
    Settings out;
    for (const auto &key : config_keys()) {
        std::string name = "VLAB_";
        for (char c : key)
            name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (const char *value = getenv(name.c_str()))
            out[key] = value;
    }
    return out;
}

ServerConfig resolve_config(const Settings &file, const Settings &env, const Settings &flags)
{
    ServerConfig config;
    for (const auto &key : config_keys())
        config.sources[key] = "default";

    auto apply = [&](const Settings &layer, const char *source) {
        for (const auto &[key, text] : layer) {
            if (key == "host")
                config.host = text;
            else if (key == "port")
                config.port = to_int(key, text, 0, 65535);
            else if (key == "admin_port")
                config.admin_port = to_int(key, text, 0, 65535);
            else if (key == "journal")
                config.journal = text;
            else if (key == "fsync")
                config.fsync = to_bool(key, text);
            else if (key == "accounts")
                config.accounts = text;
            else if (key == "game")
                config.game = text;
            else if (key == "static_dir")
                config.static_dir = text;
            else if (key == "threads")
                config.threads = to_int(key, text, 1, 256);
            else if (key == "heartbeat_interval_s")
                config.heartbeat_s = to_int(key, text, 1, 3600);
            else if (key == "heartbeat_misses")
                config.heartbeat_misses = to_int(key, text, 1, 100);
            else
                fail(Errc::validation_error, "unknown config key '" + key + "'");
            config.sources[key] = source;
        }
    };
    apply(file, "file");
    apply(env, "env");
    apply(flags, "flag");
    if (config.journal.empty())
        fail(Errc::validation_error, "journal path must not be empty");
    return config;
}

} // namespace vlab::cli
