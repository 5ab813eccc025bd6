// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/admin/accounts.hpp"
#include "vlab/lifecycle/engine.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace vlab {

struct AdminServerOptions {
    std::string address = "127.0.0.1";
    // 0 picks a free port.
    int port = 0;
    TimeMs session_ttl_ms = 8 * 3600 * 1000;
    // Directory holding admin/ and play-ui/ assets; built-in pages otherwise.
    std::optional<std::filesystem::path> static_dir;
    std::size_t threads = 8;
    // Comment line sent on idle event streams.
    TimeMs keepalive_ms = 15000;
    AdminSessions::Clock clock;
};

// Authenticated HTTP control plane plus the /api/events push stream.
//
// Install it as the hub's downstream listener to feed the stream:
//   hub.set_downstream(&admin);
class AdminServer final : public EngineListener {
public:
    AdminServer(Engine &engine, AccountStore accounts, AdminServerOptions options = {});
    ~AdminServer() override;

    AdminServer(const AdminServer &) = delete;
    AdminServer &operator=(const AdminServer &) = delete;

    // Binds and serves on a background thread; throws io-error when the port is taken.
    void start();
    void stop();
    int port() const noexcept;

    // Pushes an event to every /api/events subscriber.
    void publish(const std::string &type, const Value &data);
    std::size_t subscribers() const;

    void on_change(const ChangeEvent &change) override;
    void on_player_update(const PlayerId &player) override;
    void on_game_update(const GameId &game, bool entered) override;
    void on_lobby_update(const BatchId &batch, const GameId &game) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Monitoring summary for one batch, read at a single journal offset.
Value batch_summary(const EngineState &state, const BatchState &batch, TimeMs now);

} // namespace vlab
