// SPDX-License-Identifier: Apache-2.0
#include "vlab/sync/heartbeat.hpp"

#include "vlab/common/error.hpp"

#include <charconv>
#include <cstdlib>
#include <string>

namespace vlab {

namespace {

int positive_env(const char *name, int fallback)
{
    const char *raw = std::getenv(name);
    if (!raw || !*raw)
        return fallback;
    std::string_view text(raw);
    int value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size() || value <= 0)
        fail(Errc::invalid_argument, std::string(name) + " must be a positive integer, got '" + raw + "'");
    return value;
}

} // namespace

std::string_view to_string(Liveness liveness) noexcept
{
    switch (liveness) {
    case Liveness::alive:
        return "alive";
    case Liveness::stale:
        return "stale";
    case Liveness::dead:
        return "dead";
    }
    return "alive";
}

Liveness heartbeat_check(TimeMs last_seen, TimeMs now, TimeMs interval_ms, int misses_allowed)
{
    if (interval_ms <= 0 || now <= last_seen)
        return Liveness::alive;
    auto misses = (now - last_seen) / interval_ms;
    if (misses == 0)
        return Liveness::alive;
    if (misses < misses_allowed)
        return Liveness::stale;
    return Liveness::dead;
}

HeartbeatConfig heartbeat_from_env(HeartbeatConfig base)
{
    base.interval_s = positive_env("VLAB_HEARTBEAT_INTERVAL_S", base.interval_s);
    base.misses_allowed = positive_env("VLAB_HEARTBEAT_MISSES", base.misses_allowed);
    return base;
}

} // namespace vlab
