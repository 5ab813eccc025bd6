// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace vlab {

// Admin accounts with salted PBKDF2-SHA256 hashes, kept in a YAML file.
class AccountStore {
public:
    static constexpr int default_iterations = 120000;

    // Missing file means no accounts. Throws parse-error / validation-error.
    static AccountStore load(const std::filesystem::path &path);
    void save(const std::filesystem::path &path) const;

    // Adds or replaces the account.
    void set_password(const std::string &name, const std::string &password, int iterations = default_iterations);
    bool remove(const std::string &name);
    bool contains(const std::string &name) const;
    std::size_t size() const { return accounts_.size(); }
    std::vector<std::string> names() const;

    // Costs the same whether or not the account exists.
    bool verify(const std::string &name, const std::string &password) const;

private:
    struct Account {
        std::string salt;
        int iterations = default_iterations;
        std::string hash;
    };
    std::map<std::string, Account> accounts_;
};

// Bearer tokens for admin sessions. Tokens live only in memory and only their
// hashes are kept.
class AdminSessions {
public:
    using Clock = std::function<TimeMs()>;

    explicit AdminSessions(TimeMs ttl_ms = 8 * 3600 * 1000, Clock clock = {});

    struct Issued {
        std::string token;
        TimeMs expires_at = 0;
    };

    Issued issue(const std::string &admin);
    // The admin name for a live token.
    std::optional<std::string> validate(const std::string &token);
    void revoke(const std::string &token);

    TimeMs now() const;

private:
    TimeMs ttl_ms_;
    Clock clock_;
    std::mutex mutex_;
    std::map<std::string, std::pair<std::string, TimeMs>> sessions_;
};

// Wall clock in milliseconds since the epoch.
TimeMs system_now_ms();

} // namespace vlab
