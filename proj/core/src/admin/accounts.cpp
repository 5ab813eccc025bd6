// SPDX-License-Identifier: Apache-2.0
#include "vlab/admin/accounts.hpp"

#include "vlab/common/crypto.hpp"
#include "vlab/common/error.hpp"

#include "../common/yaml_util.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace vlab {

namespace {

bool valid_name(const std::string &name)
{
    if (name.empty() || name.size() > 64)
        return false;
    for (char c : name)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            return false;
    return true;
}

} // namespace

AccountStore AccountStore::load(const std::filesystem::path &path)
{
    AccountStore store;
    std::ifstream in(path);
    if (!in)
        return store;
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto root = yaml::load(buffer.str());
    if (!root || root.IsNull())
        return store;
    yaml::expect_map(root, "accounts file");
    yaml::check_keys(root, {"accounts"}, "accounts file");
    if (!root["accounts"])
        return store;
    yaml::expect_seq(root["accounts"], "accounts");
    for (const auto &node : root["accounts"]) {
        yaml::expect_map(node, "account");
        yaml::check_keys(node, {"name", "salt", "iterations", "hash"}, "account");
        Account account;
        auto name = yaml::text(node["name"], "account name");
        account.salt = yaml::text(node["salt"], "account salt");
        account.iterations = yaml::integer(node["iterations"], "account iterations");
        account.hash = yaml::text(node["hash"], "account hash");
        if (account.iterations < 1000)
            fail(Errc::validation_error, "account " + name + ": iterations below 1000");
        store.accounts_[name] = account;
    }
    return store;
}

void AccountStore::save(const std::filesystem::path &path) const
{
    YAML::Emitter out;
    out << YAML::BeginMap << YAML::Key << "accounts" << YAML::Value << YAML::BeginSeq;
    for (const auto &[name, account] : accounts_) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << name;
        out << YAML::Key << "salt" << YAML::Value << account.salt;
        out << YAML::Key << "iterations" << YAML::Value << account.iterations;
        out << YAML::Key << "hash" << YAML::Value << account.hash;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream file(tmp, std::ios::trunc);
        if (!file)
            fail(Errc::io_error, "cannot write " + tmp.string());
        file << out.c_str() << "\n";
        if (!file)
            fail(Errc::io_error, "cannot write " + tmp.string());
    }
    std::filesystem::permissions(tmp, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
    std::filesystem::rename(tmp, path);
}

void AccountStore::set_password(const std::string &name, const std::string &password, int iterations)
{
    if (!valid_name(name))
        fail(Errc::invalid_argument, "account names use letters, digits, '-', '_' and '.'");
    if (password.size() < 8)
        fail(Errc::invalid_argument, "password must have at least 8 characters");
    Account account;
    account.salt = SecureTokenSource().next_token();
    account.iterations = iterations;
    account.hash = pbkdf2_sha256_hex(password, account.salt, iterations);
    accounts_[name] = account;
}

bool AccountStore::remove(const std::string &name)
{
    return accounts_.erase(name) > 0;
}

bool AccountStore::contains(const std::string &name) const
{
    return accounts_.count(name) > 0;
}

std::vector<std::string> AccountStore::names() const
{
    std::vector<std::string> out;
    for (const auto &[name, account] : accounts_)
        out.push_back(name);
    return out;
}

bool AccountStore::verify(const std::string &name, const std::string &password) const
{
    auto it = accounts_.find(name);
    if (it == accounts_.end()) {
        // Burn the same work so unknown names are not distinguishable by timing.
        auto dummy = pbkdf2_sha256_hex(password, "0000000000000000", default_iterations);
        constant_time_equal(dummy, dummy);
        return false;
    }
    auto hash = pbkdf2_sha256_hex(password, it->second.salt, it->second.iterations);
    return constant_time_equal(hash, it->second.hash);
}

TimeMs system_now_ms()
{
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

AdminSessions::AdminSessions(TimeMs ttl_ms, Clock clock) : ttl_ms_(ttl_ms), clock_(std::move(clock))
{
    if (!clock_)
        clock_ = system_now_ms;
}

TimeMs AdminSessions::now() const
{
    return clock_();
}

AdminSessions::Issued AdminSessions::issue(const std::string &admin)
{
    // The prefix keeps admin tokens visibly apart from player session secrets.
    Issued issued{"adm_" + SecureTokenSource().next_token() + SecureTokenSource().next_token(), now() + ttl_ms_};
    std::lock_guard lock(mutex_);
    auto t = now();
    for (auto it = sessions_.begin(); it != sessions_.end();)
        it = it->second.second <= t ? sessions_.erase(it) : std::next(it);
    sessions_[sha256_hex(issued.token)] = {admin, issued.expires_at};
    return issued;
}

std::optional<std::string> AdminSessions::validate(const std::string &token)
{
    if (token.rfind("adm_", 0) != 0)
        return std::nullopt;
    auto key = sha256_hex(token);
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(key);
    if (it == sessions_.end())
        return std::nullopt;
    if (it->second.second <= now()) {
        sessions_.erase(it);
        return std::nullopt;
    }
    return it->second.first;
}

void AdminSessions::revoke(const std::string &token)
{
    std::lock_guard lock(mutex_);
    sessions_.erase(sha256_hex(token));
}

} // namespace vlab
