// SPDX-License-Identifier: Apache-2.0
#include "vlab/model/scope.hpp"

#include "vlab/common/error.hpp"

#include <array>

namespace vlab {

namespace {

constexpr std::array<std::pair<ScopeKind, std::string_view>, 6> kind_names{{
    {ScopeKind::game, "game"},
    {ScopeKind::player, "player"},
    {ScopeKind::round, "round"},
    {ScopeKind::stage, "stage"},
    {ScopeKind::player_round, "player_round"},
    {ScopeKind::player_stage, "player_stage"},
}};

void require_id(const std::string &id, std::string_view what)
{
    if (id.empty() || id.find(':') != std::string::npos)
        fail(Errc::invalid_argument, std::string("bad ") + std::string(what) + " id '" + id + "'");
}

} // namespace

std::string_view to_string(ScopeKind kind) noexcept
{
    for (auto &[k, name] : kind_names)
        if (k == kind)
            return name;
    return "unknown";
}

std::optional<ScopeKind> parse_scope_kind(std::string_view text) noexcept
{
    for (auto &[k, name] : kind_names)
        if (name == text)
            return k;
    return std::nullopt;
}

ScopeRef::ScopeRef(ScopeKind kind, std::string primary, std::optional<std::string> secondary)
    : kind_(kind), primary_(std::move(primary)), secondary_(std::move(secondary))
{
    require_id(primary_, vlab::to_string(kind_));
    if (composite()) {
        if (!secondary_)
            fail(Errc::invalid_argument, "composite scope requires a player id");
        require_id(*secondary_, "player");
    } else if (secondary_) {
        fail(Errc::invalid_argument, "only composite scopes carry a secondary id");
    }
}

ScopeRef ScopeRef::game(const GameId &id) { return ScopeRef(ScopeKind::game, id.str(), std::nullopt); }
ScopeRef ScopeRef::player(const PlayerId &id) { return ScopeRef(ScopeKind::player, id.str(), std::nullopt); }
ScopeRef ScopeRef::round(const RoundId &id) { return ScopeRef(ScopeKind::round, id.str(), std::nullopt); }
ScopeRef ScopeRef::stage(const StageId &id) { return ScopeRef(ScopeKind::stage, id.str(), std::nullopt); }

ScopeRef ScopeRef::player_round(const RoundId &round, const PlayerId &player)
{
    return ScopeRef(ScopeKind::player_round, round.str(), player.str());
}

ScopeRef ScopeRef::player_stage(const StageId &stage, const PlayerId &player)
{
    return ScopeRef(ScopeKind::player_stage, stage.str(), player.str());
}

ScopeRef ScopeRef::parse(std::string_view text)
{
    auto first = text.find(':');
    if (first == std::string_view::npos)
        fail(Errc::invalid_argument, "scope '" + std::string(text) + "' has no kind prefix");
    auto kind = parse_scope_kind(text.substr(0, first));
    if (!kind)
        fail(Errc::invalid_argument, "unknown scope kind in '" + std::string(text) + "'");
    auto rest = text.substr(first + 1);
    auto second = rest.find(':');
    if (second == std::string_view::npos)
        return ScopeRef(*kind, std::string(rest), std::nullopt);
    return ScopeRef(*kind, std::string(rest.substr(0, second)), std::string(rest.substr(second + 1)));
}

std::optional<GameId> ScopeRef::game_id() const
{
    if (kind_ == ScopeKind::player)
        return std::nullopt;
    return game_of(primary_);
}

std::optional<PlayerId> ScopeRef::player_id() const
{
    if (kind_ == ScopeKind::player)
        return PlayerId(primary_);
    if (composite())
        return PlayerId(*secondary_);
    return std::nullopt;
}

std::string ScopeRef::to_string() const
{
    std::string out(vlab::to_string(kind_));
    out += ':';
    out += primary_;
    if (secondary_) {
        out += ':';
        out += *secondary_;
    }
    return out;
}

} // namespace vlab
