// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/ids.hpp"
#include "vlab/common/value.hpp"
#include "vlab/treatments/treatment.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vlab {

enum class Phase { consent, intro, lobby, game, outro, exited };
enum class PlayerStatus { new_player, intro, lobby, playing, exited, dropped };
enum class GameStatus { pending, running, paused, ended, cancelled };

std::string_view to_string(Phase phase) noexcept;
std::string_view to_string(PlayerStatus status) noexcept;
std::string_view to_string(GameStatus status) noexcept;
Phase parse_phase(std::string_view text);
PlayerStatus parse_player_status(std::string_view text);
GameStatus parse_game_status(std::string_view text);

inline bool is_terminal(GameStatus status) noexcept
{
    return status == GameStatus::ended || status == GameStatus::cancelled;
}

struct PlayerState {
    PlayerId id;
    std::string identifier;
    // SHA-256 of the session secret; the secret itself is never stored.
    std::string token_hash;
    Phase phase = Phase::consent;
    std::size_t intro_step = 0;
    PlayerStatus status = PlayerStatus::new_player;
    std::optional<GameId> current_game;
    std::optional<BatchId> batch;
    std::optional<std::string> reason;
    // When the player entered the lobby; drives the waiting display.
    std::optional<TimeMs> lobby_since;

    bool operator==(const PlayerState &) const = default;
};

struct StageState {
    std::size_t index = 0;
    StageId id;
    std::string name;
    std::optional<int> duration_s;
    bool advance_on_submit = false;
    std::set<PlayerId> submitted;
    std::optional<TimeMs> started_at;
    std::optional<TimeMs> deadline;
    std::optional<std::string> end_reason;

    bool operator==(const StageState &) const = default;
};

struct RoundState {
    std::size_t index = 0;
    RoundId id;
    std::vector<StageState> stages;

    bool operator==(const RoundState &) const = default;
};

struct Cursor {
    enum class Position { pre_start, active, ended };
    Position position = Position::pre_start;
    std::size_t round = 0;
    std::size_t stage = 0;

    static Cursor at(std::size_t round, std::size_t stage) { return {Position::active, round, stage}; }
    static Cursor ended() { return {Position::ended, 0, 0}; }

    // Lexicographic order with pre_start first and ended last.
    bool precedes(const Cursor &other) const noexcept;

    bool operator==(const Cursor &) const = default;
};

struct GameState {
    GameId id;
    BatchId batch;
    Treatment treatment;
    // Roster fixed at launch. Removed players stay here and are listed in `removed`.
    std::vector<PlayerId> players;
    std::set<PlayerId> removed;
    std::vector<RoundState> rounds;
    Cursor cursor;
    GameStatus status = GameStatus::pending;
    std::set<std::string> public_keys;
    std::optional<TimeMs> paused_remaining_ms;
    std::optional<std::string> end_reason;

    std::vector<PlayerId> active_players() const;
    bool is_member(const PlayerId &player) const;
    const StageState *current_stage() const;
    const RoundState *find_round(const RoundId &id) const;
    const StageState *find_stage(const StageId &id) const;

    bool operator==(const GameState &) const = default;
};

Value to_value(const Cursor &cursor);
Cursor cursor_from_value(const Value &value);
Value to_value(const PlayerState &player);
Value to_value(const GameState &game);

} // namespace vlab
