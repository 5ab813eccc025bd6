// SPDX-License-Identifier: Apache-2.0
#include "vlab/lifecycle/lobby.hpp"

#include <algorithm>

namespace vlab {

std::string_view to_string(LobbyAction action) noexcept
{
    switch (action) {
    case LobbyAction::none:
        return "none";
    case LobbyAction::launch:
        return "launch";
    case LobbyAction::timeout_fail:
        return "timeout_fail";
    case LobbyAction::timeout_start_anyway:
        return "timeout_start_anyway";
    case LobbyAction::timeout_extend:
        return "timeout_extend";
    }
    return "?";
}

LobbyStatus lobby_status(const LobbyInstance &lobby, TimeMs now, std::optional<TimeMs> since)
{
    LobbyStatus status;
    auto start = since ? since : lobby.opened_at;
    status.waiting_ms = start ? std::max<TimeMs>(0, now - *start) : 0;
    status.players_present = lobby.present;
    status.players_needed = lobby.player_count > lobby.present ? lobby.player_count - lobby.present : 0;
    return status;
}

LobbyAction lobby_tick(const LobbyInstance &lobby, TimeMs now)
{
    if (lobby.player_count > 0 && lobby.present >= lobby.player_count)
        return LobbyAction::launch;
    if (!lobby.deadline || now < *lobby.deadline)
        return LobbyAction::none;
    switch (lobby.config.strategy) {
    case TimeoutStrategy::fail:
        return LobbyAction::timeout_fail;
    case TimeoutStrategy::start_anyway:
        return lobby.present > 0 ? LobbyAction::timeout_start_anyway : LobbyAction::timeout_fail;
    case TimeoutStrategy::extend:
        return lobby.extensions < lobby.config.extend_limit.value_or(0) ? LobbyAction::timeout_extend
                                                                       : LobbyAction::timeout_fail;
    }
    return LobbyAction::none;
}

} // namespace vlab
