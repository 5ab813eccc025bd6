// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/ids.hpp"
#include "vlab/treatments/protocol.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vlab {

struct GameSlot {
    GameId game;
    std::string treatment;
    std::size_t capacity = 0;
    std::vector<PlayerId> members;
    bool open = true;

    bool has_room() const noexcept { return open && members.size() < capacity; }
};

struct SlotAssignment {
    GameId game;
    std::size_t position = 0;

    bool operator==(const SlotAssignment &) const = default;
};

// Seats arriving players into a batch's planned games. Not thread-safe; the lobby
// serializes calls per batch.
class BatchAssigner {
public:
    // `draws` is the number of earlier random choices; each choice uses a generator
    // derived from (seed, draw index), so an assigner can be rebuilt mid-batch.
    BatchAssigner(AssignmentMethod method, std::vector<GameSlot> slots, std::uint64_t seed, std::uint64_t draws = 0);

    // nullopt means waitlisted. Throws batch-closed once closed, invalid-argument
    // if the player already holds a seat.
    std::optional<SlotAssignment> assign(const PlayerId &player);

    // Frees the player's seat in a still-open game. Returns false if not seated.
    bool release(const PlayerId &player);

    // Game launched; it accepts nobody else.
    void close_slot(const GameId &game);
    // Lobby gave up on the game; empty it so it can fill again.
    std::vector<PlayerId> reset_slot(const GameId &game);

    void close() noexcept { closed_ = true; }
    bool closed() const noexcept { return closed_; }

    AssignmentMethod method() const noexcept { return method_; }
    std::uint64_t draws() const noexcept { return draws_; }
    const std::vector<GameSlot> &slots() const noexcept { return slots_; }
    const GameSlot *slot(const GameId &game) const;
    std::optional<GameId> seat_of(const PlayerId &player) const;

private:
    GameSlot &slot_ref(const GameId &game);

    AssignmentMethod method_;
    std::vector<GameSlot> slots_;
    std::uint64_t seed_;
    std::uint64_t draws_;
    bool closed_ = false;
};

} // namespace vlab
