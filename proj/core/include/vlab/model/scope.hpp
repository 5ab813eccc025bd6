// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/ids.hpp"

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace vlab {

enum class ScopeKind { game, player, round, stage, player_round, player_stage };

std::string_view to_string(ScopeKind kind) noexcept;
std::optional<ScopeKind> parse_scope_kind(std::string_view text) noexcept;

// Entity an attribute is attached to. Composite kinds name the round or stage in
// `primary` and the player in `secondary`; every other kind has no secondary id.
class ScopeRef {
public:
    ScopeRef() = default;

    static ScopeRef game(const GameId &id);
    static ScopeRef player(const PlayerId &id);
    static ScopeRef round(const RoundId &id);
    static ScopeRef stage(const StageId &id);
    static ScopeRef player_round(const RoundId &round, const PlayerId &player);
    static ScopeRef player_stage(const StageId &stage, const PlayerId &player);

    // Parses "kind:primary[:secondary]"; throws invalid-argument on malformed text.
    static ScopeRef parse(std::string_view text);

    ScopeKind kind() const noexcept { return kind_; }
    const std::string &primary() const noexcept { return primary_; }
    const std::optional<std::string> &secondary() const noexcept { return secondary_; }

    bool composite() const noexcept { return kind_ == ScopeKind::player_round || kind_ == ScopeKind::player_stage; }

    // Owning game for every kind except player.
    std::optional<GameId> game_id() const;
    // The player for player and composite kinds.
    std::optional<PlayerId> player_id() const;

    std::string to_string() const;

    auto operator<=>(const ScopeRef &) const = default;

private:
    ScopeRef(ScopeKind kind, std::string primary, std::optional<std::string> secondary);

    ScopeKind kind_ = ScopeKind::game;
    std::string primary_;
    std::optional<std::string> secondary_;
};

} // namespace vlab
