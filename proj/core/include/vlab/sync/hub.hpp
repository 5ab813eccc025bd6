// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/lifecycle/engine.hpp"
#include "vlab/sync/heartbeat.hpp"
#include "vlab/sync/latency.hpp"
#include "vlab/sync/wire.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace vlab {

// Server end of one player channel, supplied by the transport.
class Connection {
public:
    virtual ~Connection() = default;
    // Queues one text frame. Must not block and must not call back into the hub.
    virtual void send(std::string text) = 0;
    // Closes the channel; the transport still reports detach() afterwards.
    virtual void close() = 0;
};

struct HubOptions {
    HeartbeatConfig heartbeat;
};

// Session layer between transports and the engine: binds connections to players,
// forwards intents, and fans engine output out to the connections allowed to see it.
class Hub final : public EngineListener {
public:
    using ConnectionId = std::uint64_t;

    explicit Hub(Engine &engine, HubOptions options = {});
    ~Hub() override;

    Hub(const Hub &) = delete;
    Hub &operator=(const Hub &) = delete;

    // Any thread.
    ConnectionId attach(std::shared_ptr<Connection> connection);
    void receive(ConnectionId id, std::string_view text);
    void detach(ConnectionId id);

    // Receives every engine notification after the hub has handled it.
    void set_downstream(EngineListener *listener) noexcept { downstream_ = listener; }

    LatencyRecorder &latency() noexcept { return latency_; }
    const HubOptions &options() const noexcept { return options_; }
    std::size_t connection_count() const;
    std::optional<PlayerId> player_of(ConnectionId id) const;
    // Stops heartbeat ticks; connections stay open.
    void stop();

    void on_change(const ChangeEvent &change) override;
    void on_player_update(const PlayerId &player) override;
    void on_game_update(const GameId &game, bool entered) override;
    void on_lobby_update(const BatchId &batch, const GameId &game) override;

private:
    struct Outlet;

    std::shared_ptr<Outlet> find(ConnectionId id) const;
    std::shared_ptr<Outlet> outlet_for(const PlayerId &player) const;
    void send(Outlet &outlet, FrameType type, Value body);
    void send_error(Outlet &outlet, std::optional<std::uint64_t> ref, Errc code, const std::string &message);
    void send_error(const std::shared_ptr<Outlet> &outlet, std::optional<std::uint64_t> ref, std::exception_ptr error);
    void dispatch(const std::shared_ptr<Outlet> &outlet, Frame frame);
    void do_hello(const std::shared_ptr<Outlet> &outlet, std::uint64_t ref, std::optional<std::string> token,
                  std::optional<std::string> identifier);
    void do_resync(const std::shared_ptr<Outlet> &outlet);
    Value welcome_body(Outlet &outlet, const PlayerId &player);
    Value transition_body(Outlet &outlet, const PlayerId &player, bool with_attributes);
    Value snapshot_attributes(Outlet &outlet, const PlayerId &player);
    void lost(const std::shared_ptr<Outlet> &outlet, std::string_view event);
    void arm_tick();
    void tick();

    Engine &engine_;
    HubOptions options_;
    std::shared_ptr<Strand> strand_;
    EngineListener *downstream_ = nullptr;
    LatencyRecorder latency_;

    mutable std::mutex mutex_;
    ConnectionId next_id_ = 1;
    std::map<ConnectionId, std::shared_ptr<Outlet>> outlets_;
    std::map<PlayerId, ConnectionId> by_player_;
    bool tick_armed_ = false;
    std::atomic<bool> stopped_{false};
};

} // namespace vlab
