// SPDX-License-Identifier: Apache-2.0
#include "vlab/lifecycle/flow.hpp"

#include "vlab/common/error.hpp"

#include <array>
#include <string>
#include <utility>

namespace vlab {

namespace {

constexpr std::array<std::pair<FlowEvent, std::string_view>, 8> flow_events{{
    {FlowEvent::consented, "consented"},
    {FlowEvent::intro_step, "intro_step"},
    {FlowEvent::intro_done, "intro_done"},
    {FlowEvent::game_assigned, "game_assigned"},
    {FlowEvent::game_over, "game_over"},
    {FlowEvent::survey_done, "survey_done"},
    {FlowEvent::lobby_exit, "lobby_exit"},
    {FlowEvent::drop, "drop"},
}};

[[noreturn]] void illegal(const FlowState &state, FlowEvent event)
{
    fail(Errc::flow_violation,
         std::string(to_string(event)) + " is not allowed in phase " + std::string(to_string(state.phase)));
}

} // namespace

std::string_view to_string(FlowEvent event) noexcept
{
    for (auto &[e, name] : flow_events)
        if (e == event)
            return name;
    return "?";
}

std::optional<FlowEvent> parse_flow_event(std::string_view text) noexcept
{
    for (auto &[e, name] : flow_events)
        if (name == text)
            return e;
    return std::nullopt;
}

FlowState advance_flow(FlowState state, FlowEvent event, std::size_t intro_steps)
{
    if (intro_steps == 0)
        intro_steps = 1;
    switch (event) {
    case FlowEvent::consented:
        if (state.phase != Phase::consent)
            illegal(state, event);
        return {Phase::intro, 0};
    case FlowEvent::intro_step:
        // Finishing the last page is intro_done, not another step.
        if (state.phase != Phase::intro || state.intro_step + 1 >= intro_steps)
            illegal(state, event);
        return {Phase::intro, state.intro_step + 1};
    case FlowEvent::intro_done:
        if (state.phase != Phase::intro || state.intro_step + 1 != intro_steps)
            illegal(state, event);
        return {Phase::lobby, state.intro_step};
    case FlowEvent::game_assigned:
        if (state.phase != Phase::lobby)
            illegal(state, event);
        return {Phase::game, state.intro_step};
    case FlowEvent::game_over:
        if (state.phase != Phase::game)
            illegal(state, event);
        return {Phase::outro, state.intro_step};
    case FlowEvent::survey_done:
        if (state.phase != Phase::outro)
            illegal(state, event);
        return {Phase::exited, state.intro_step};
    case FlowEvent::lobby_exit:
        if (state.phase != Phase::lobby)
            illegal(state, event);
        return {Phase::outro, state.intro_step};
    case FlowEvent::drop:
        if (state.phase == Phase::exited)
            illegal(state, event);
        return {Phase::exited, state.intro_step};
    }
    illegal(state, event);
}

PlayerStatus status_for(Phase phase) noexcept
{
    switch (phase) {
    case Phase::consent:
        return PlayerStatus::new_player;
    case Phase::intro:
        return PlayerStatus::intro;
    case Phase::lobby:
        return PlayerStatus::lobby;
    case Phase::game:
        return PlayerStatus::playing;
    case Phase::outro:
    case Phase::exited:
        return PlayerStatus::exited;
    }
    return PlayerStatus::exited;
}

} // namespace vlab
