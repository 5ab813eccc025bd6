// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/runtime/scheduler.hpp"

#include <functional>
#include <memory>
#include <string>

namespace vlab {

// Client end of one player channel.
class ClientChannel {
public:
    virtual ~ClientChannel() = default;
    virtual void send(std::string text) = 0;
    virtual void close() = 0;
};

// Callbacks a channel delivers on `strand`, in arrival order.
struct ChannelEvents {
    std::shared_ptr<Strand> strand;
    std::function<void(std::string)> on_frame;
    std::function<void()> on_closed;
};

using Connector = std::function<std::unique_ptr<ClientChannel>(ChannelEvents events)>;

} // namespace vlab
