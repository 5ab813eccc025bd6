// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/ids.hpp"
#include "vlab/model/attribute_store.hpp"
#include "vlab/model/entities.hpp"
#include "vlab/treatments/assignment.hpp"
#include "vlab/treatments/protocol.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vlab {

enum class BatchStatus { created, running, ended, terminated };

std::string_view to_string(BatchStatus status) noexcept;
BatchStatus parse_batch_status(std::string_view text);

inline bool is_terminal(BatchStatus status) noexcept
{
    return status == BatchStatus::ended || status == BatchStatus::terminated;
}

struct StoredProtocol {
    ProtocolId id;
    std::string text;
    std::string hash;

    bool operator==(const StoredProtocol &) const = default;
};

// A planned game as the lobby sees it.
struct LobbySlot {
    GameId game;
    std::string treatment;
    std::size_t capacity = 0;
    std::vector<PlayerId> members;
    bool open = true;
    // Armed when the first player sits down; cleared when the slot resets.
    std::optional<TimeMs> opened_at;
    std::optional<TimeMs> deadline;
    int extensions = 0;

    bool operator==(const LobbySlot &) const = default;
};

struct BatchState {
    BatchId id;
    ProtocolId protocol;
    BatchSpec spec;
    LobbyConfig lobby;
    std::uint64_t seed = 0;
    std::uint64_t draws = 0;
    BatchStatus status = BatchStatus::created;
    std::vector<LobbySlot> slots;

    std::vector<GameSlot> assignment_slots() const;
    const LobbySlot *slot(const GameId &game) const;
    LobbySlot *slot(const GameId &game);

    bool operator==(const BatchState &) const = default;
};

// Everything the journal determines. The live engine maintains one of these
// directly; replay rebuilds one from records, and the two must agree.
struct EngineState {
    std::map<PlayerId, PlayerState> players;
    std::map<std::string, PlayerId> by_identifier;
    std::map<GameId, GameState> games;
    std::map<BatchId, BatchState> batches;
    std::map<ProtocolId, StoredProtocol> protocols;
    // Players with no seat available, in arrival order.
    std::vector<PlayerId> waitlist;
    std::vector<Attribute> attributes;
    std::vector<LogEntry> logs;
    std::uint64_t next_offset = 0;

    bool operator==(const EngineState &) const = default;
};

Value to_value(const LobbySlot &slot);
Value to_value(const BatchState &batch);
// Canonical rendering used for comparisons and diagnostics.
Value to_value(const EngineState &state);

} // namespace vlab
