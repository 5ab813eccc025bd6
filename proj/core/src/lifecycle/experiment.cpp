// SPDX-License-Identifier: Apache-2.0
#include "vlab/lifecycle/experiment.hpp"

#include "vlab/common/error.hpp"

#include <array>
#include <utility>

namespace vlab {

namespace {

constexpr std::array<std::pair<DisconnectMode, std::string_view>, 4> modes{{
    {DisconnectMode::continue_without, "continue_without"},
    {DisconnectMode::cancel_trial, "cancel_trial"},
    {DisconnectMode::pause_trial, "pause_trial"},
    {DisconnectMode::custom, "custom"},
}};

} // namespace

std::string_view to_string(DisconnectMode mode) noexcept
{
    for (auto &[m, name] : modes)
        if (m == mode)
            return name;
    return "?";
}

std::optional<DisconnectMode> parse_disconnect_mode(std::string_view text) noexcept
{
    for (auto &[m, name] : modes)
        if (name == text)
            return m;
    return std::nullopt;
}

ScopeRef GameContext::round_scope() const
{
    auto r = round_index();
    if (!r)
        fail(Errc::scope_not_found, "no current round");
    return ScopeRef::round(make_round_id(game_id(), *r));
}

ScopeRef GameContext::stage_scope() const
{
    auto r = round_index();
    auto s = stage_index();
    if (!r || !s)
        fail(Errc::scope_not_found, "no current stage");
    return ScopeRef::stage(make_stage_id(game_id(), *r, *s));
}

ScopeRef GameContext::player_round(const PlayerId &player) const
{
    return ScopeRef::player_round(RoundId(round_scope().primary()), player);
}

ScopeRef GameContext::player_stage(const PlayerId &player) const
{
    return ScopeRef::player_stage(StageId(stage_scope().primary()), player);
}

void validate_experiment(const Experiment &experiment)
{
    if (experiment.disconnect.grace_s < 0)
        fail(Errc::validation_error, "disconnect grace must be >= 0");
    if (experiment.disconnect.mode == DisconnectMode::custom && !experiment.callbacks.on_disconnect)
        fail(Errc::validation_error, "custom disconnect policy requires an on_disconnect handler");
}

std::vector<std::vector<StageSpec>> default_structure()
{
    return {{StageSpec{"play", std::nullopt, true}}};
}

} // namespace vlab
