// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/sync/hub.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace vlab {

struct WsServerOptions {
    std::string address = "127.0.0.1";
    // 0 picks a free port.
    std::uint16_t port = 0;
    std::string path = "/play";
    std::size_t threads = 1;
    std::size_t max_message_bytes = 1 << 20;
};

// Player WebSocket endpoint. Each upgraded connection is attached to the hub;
// text frames go to Hub::receive and hub output is written back in order.
class WsServer {
public:
    WsServer(Hub &hub, WsServerOptions options = {});
    ~WsServer();

    WsServer(const WsServer &) = delete;
    WsServer &operator=(const WsServer &) = delete;

    // Binds and starts accepting; throws io-error when the port is taken.
    void start();
    void stop();
    std::uint16_t port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace vlab
