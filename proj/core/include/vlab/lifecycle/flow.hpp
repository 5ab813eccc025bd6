// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/model/entities.hpp"

#include <cstddef>
#include <optional>
#include <string_view>

namespace vlab {

enum class FlowEvent {
    consented,
    intro_step,
    intro_done,
    game_assigned,
    game_over,
    survey_done,
    // Lobby gave up on the player (timeout or batch shut down).
    lobby_exit,
    // Disconnected past grace or retired by an admin; ends participation anywhere.
    drop,
};

std::string_view to_string(FlowEvent event) noexcept;
std::optional<FlowEvent> parse_flow_event(std::string_view text) noexcept;

struct FlowState {
    Phase phase = Phase::consent;
    std::size_t intro_step = 0;

    bool operator==(const FlowState &) const = default;
};

// One step of the player flow. `intro_steps` is how many intro pages precede the
// lobby (at least one). Throws flow-violation for an event illegal in the phase.
FlowState advance_flow(FlowState state, FlowEvent event, std::size_t intro_steps = 1);

// Status shown for a phase; drop yields dropped instead.
PlayerStatus status_for(Phase phase) noexcept;

} // namespace vlab
