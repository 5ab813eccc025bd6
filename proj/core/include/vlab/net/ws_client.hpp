// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/bots/channel.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace vlab {

// Client side of the player WebSocket, for bots driving a live server. Owns one
// I/O thread shared by every channel it creates.
class WsClientPool {
public:
    WsClientPool(std::string host, std::uint16_t port, std::string path = "/play");
    ~WsClientPool();

    WsClientPool(const WsClientPool &) = delete;
    WsClientPool &operator=(const WsClientPool &) = delete;

    // Channels connect asynchronously; frames sent before the handshake are queued.
    Connector connector();
    void stop();

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

class Hub;

// Scenario transport over real sockets: starts a WsServer on a free loopback
// port for the hub and connects bots through a client pool. Both live as long
// as the returned connector.
std::function<Connector(Hub &)> websocket_transport();

} // namespace vlab
