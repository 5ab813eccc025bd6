// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"
#include "vlab/treatments/protocol.hpp"

#include <cstddef>
#include <optional>
#include <string_view>

namespace vlab {

// One game's waiting room.
struct LobbyInstance {
    std::size_t player_count = 0;
    std::size_t present = 0;
    LobbyConfig config;
    // First arrival; absent while empty.
    std::optional<TimeMs> opened_at;
    std::optional<TimeMs> deadline;
    int extensions = 0;
};

struct LobbyStatus {
    TimeMs waiting_ms = 0;
    std::size_t players_present = 0;
    std::size_t players_needed = 0;

    bool operator==(const LobbyStatus &) const = default;
};

enum class LobbyAction { none, launch, timeout_fail, timeout_start_anyway, timeout_extend };

std::string_view to_string(LobbyAction action) noexcept;

// `since` is when the asking player started waiting (the lobby's opening when absent).
LobbyStatus lobby_status(const LobbyInstance &lobby, TimeMs now, std::optional<TimeMs> since = std::nullopt);

// Launch as soon as the room is full; otherwise the configured strategy once the
// deadline passes. start_anyway with nobody present degrades to fail.
LobbyAction lobby_tick(const LobbyInstance &lobby, TimeMs now);

} // namespace vlab
