// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <utility>

namespace vlab {

template <typename Tag>
class Id {
public:
    Id() = default;
    explicit Id(std::string value) : value_(std::move(value)) {}

    const std::string &str() const noexcept { return value_; }
    bool empty() const noexcept { return value_.empty(); }

    auto operator<=>(const Id &) const = default;

private:
    std::string value_;
};

template <typename Tag>
std::ostream &operator<<(std::ostream &os, const Id<Tag> &id)
{
    return os << id.str();
}

struct PlayerTag;
struct GameTag;
struct RoundTag;
struct StageTag;
struct BatchTag;
struct ProtocolTag;

using PlayerId = Id<PlayerTag>;
using GameId = Id<GameTag>;
using RoundId = Id<RoundTag>;
using StageId = Id<StageTag>;
using BatchId = Id<BatchTag>;
using ProtocolId = Id<ProtocolTag>;

// Player id, "server", or "admin:<name>".
using ActorId = std::string;

inline const ActorId server_actor = "server";

// Rounds and stages are named "<game>.r<k>" and "<game>.r<k>.s<j>".
RoundId make_round_id(const GameId &game, std::size_t round_index);
StageId make_stage_id(const GameId &game, std::size_t round_index, std::size_t stage_index);
GameId game_of(const std::string &entity_id);

} // namespace vlab

template <typename Tag>
struct std::hash<vlab::Id<Tag>> {
    std::size_t operator()(const vlab::Id<Tag> &id) const noexcept { return std::hash<std::string>{}(id.str()); }
};
