// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"
#include "vlab/lifecycle/lobby.hpp"
#include "vlab/model/attribute_store.hpp"
#include "vlab/model/engine_state.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace vlab {

enum class FrameType { hello, welcome, subscribe, change, submit, heartbeat, heartbeat_ack, transition, error };

std::string_view to_string(FrameType type) noexcept;
std::optional<FrameType> parse_frame_type(std::string_view text) noexcept;

// One WebSocket text message: {"type": ..., "seq": n, "body": {...}}.
struct Frame {
    FrameType type = FrameType::heartbeat;
    std::uint64_t seq = 0;
    Value body = Value::object();
};

std::string encode_frame(const Frame &frame);
// Throws protocol-violation on anything that is not a well-formed frame.
Frame decode_frame(std::string_view text);

// Body of a server change frame.
Value change_frame_body(const ChangeEvent &change);
// {scope, key, value, version} as sent in snapshots.
Value attribute_frame_body(const Attribute &attribute);

// Player flow as seen by the player (no identifier, no token).
Value flow_body(const PlayerState &player);
// Game status, cursor, current stage and active roster.
Value game_body(const GameState &game);
Value lobby_body(const LobbyStatus &status);

} // namespace vlab
