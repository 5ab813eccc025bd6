// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/bots/channel.hpp"
#include "vlab/sync/hub.hpp"

namespace vlab {

// In-process transport: frames are real wire text, handed across without sockets.
Connector loopback_connector(Hub &hub);

} // namespace vlab
