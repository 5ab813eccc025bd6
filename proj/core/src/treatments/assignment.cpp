// SPDX-License-Identifier: Apache-2.0
#include "vlab/treatments/assignment.hpp"

#include "vlab/common/crypto.hpp"
#include "vlab/common/error.hpp"

#include <algorithm>
#include <random>

namespace vlab {

BatchAssigner::BatchAssigner(AssignmentMethod method, std::vector<GameSlot> slots, std::uint64_t seed,
                             std::uint64_t draws)
    : method_(method), slots_(std::move(slots)), seed_(seed), draws_(draws)
{
}

std::optional<SlotAssignment> BatchAssigner::assign(const PlayerId &player)
{
    if (closed_)
        fail(Errc::batch_closed, "batch no longer admits players");
    if (seat_of(player))
        fail(Errc::invalid_argument, "player " + player.str() + " already holds a seat");

    GameSlot *target = nullptr;
    if (method_ == AssignmentMethod::complete) {
        auto it = std::find_if(slots_.begin(), slots_.end(), [](auto &s) { return s.has_room(); });
        if (it != slots_.end())
            target = &*it;
    } else {
        std::vector<GameSlot *> candidates;
        for (auto &s : slots_)
            if (s.has_room())
                candidates.push_back(&s);
        if (!candidates.empty()) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                              static_cast<std::uint32_t>(draws_), static_cast<std::uint32_t>(draws_ >> 32)};
            std::mt19937_64 rng(seq);
            ++draws_;
            target = candidates[uniform_index(rng, candidates.size())];
        }
    }
    if (!target)
        return std::nullopt;
    target->members.push_back(player);
    return SlotAssignment{target->game, target->members.size() - 1};
}

bool BatchAssigner::release(const PlayerId &player)
{
    for (auto &s : slots_) {
        if (!s.open)
            continue;
        auto it = std::find(s.members.begin(), s.members.end(), player);
        if (it != s.members.end()) {
            s.members.erase(it);
            return true;
        }
    }
    return false;
}

GameSlot &BatchAssigner::slot_ref(const GameId &game)
{
    auto it = std::find_if(slots_.begin(), slots_.end(), [&](auto &s) { return s.game == game; });
    if (it == slots_.end())
        fail(Errc::not_found, "no slot for game " + game.str());
    return *it;
}

void BatchAssigner::close_slot(const GameId &game)
{
    slot_ref(game).open = false;
}

std::vector<PlayerId> BatchAssigner::reset_slot(const GameId &game)
{
    auto &s = slot_ref(game);
    std::vector<PlayerId> evicted;
    evicted.swap(s.members);
    s.open = true;
    return evicted;
}

const GameSlot *BatchAssigner::slot(const GameId &game) const
{
    auto it = std::find_if(slots_.begin(), slots_.end(), [&](auto &s) { return s.game == game; });
    return it == slots_.end() ? nullptr : &*it;
}

std::optional<GameId> BatchAssigner::seat_of(const PlayerId &player) const
{
    for (auto &s : slots_)
        if (std::find(s.members.begin(), s.members.end(), player) != s.members.end())
            return s.game;
    return std::nullopt;
}

} // namespace vlab
