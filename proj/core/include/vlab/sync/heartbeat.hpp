// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"

#include <string_view>

namespace vlab {

enum class Liveness { alive, stale, dead };

std::string_view to_string(Liveness liveness) noexcept;

struct HeartbeatConfig {
    int interval_s = 5;
    int misses_allowed = 3;

    TimeMs interval_ms() const noexcept { return TimeMs(interval_s) * 1000; }
};

// Whole intervals elapsed since the connection was last heard from decide the
// state: none is alive, fewer than `misses_allowed` is stale, otherwise dead.
Liveness heartbeat_check(TimeMs last_seen, TimeMs now, TimeMs interval_ms, int misses_allowed);

// Applies VLAB_HEARTBEAT_INTERVAL_S and VLAB_HEARTBEAT_MISSES on top of `base`;
// throws invalid-argument on non-positive or malformed values.
HeartbeatConfig heartbeat_from_env(HeartbeatConfig base);

} // namespace vlab
