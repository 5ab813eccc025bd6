// SPDX-License-Identifier: Apache-2.0
#include "vlab/sync/wire.hpp"

#include "vlab/common/error.hpp"

#include <array>

namespace vlab {

namespace {

constexpr std::array<std::pair<FrameType, std::string_view>, 9> frame_names{{
    {FrameType::hello, "hello"},
    {FrameType::welcome, "welcome"},
    {FrameType::subscribe, "subscribe"},
    {FrameType::change, "change"},
    {FrameType::submit, "submit"},
    {FrameType::heartbeat, "heartbeat"},
    {FrameType::heartbeat_ack, "heartbeat_ack"},
    {FrameType::transition, "transition"},
    {FrameType::error, "error"},
}};

} // namespace

std::string_view to_string(FrameType type) noexcept
{
    for (auto &[t, name] : frame_names)
        if (t == type)
            return name;
    return "error";
}

std::optional<FrameType> parse_frame_type(std::string_view text) noexcept
{
    for (auto &[t, name] : frame_names)
        if (name == text)
            return t;
    return std::nullopt;
}

std::string encode_frame(const Frame &frame)
{
    Value v{{"type", to_string(frame.type)}, {"seq", frame.seq}, {"body", frame.body}};
    return to_text(v);
}

Frame decode_frame(std::string_view text)
{
    Value v = Value::parse(text, nullptr, false);
    if (v.is_discarded() || !v.is_object())
        fail(Errc::protocol_violation, "frame is not a JSON object");
    auto type = v.find("type");
    auto seq = v.find("seq");
    if (type == v.end() || !type->is_string())
        fail(Errc::protocol_violation, "frame without type");
    auto parsed = parse_frame_type(type->get<std::string>());
    if (!parsed)
        fail(Errc::protocol_violation, "unknown frame type " + type->get<std::string>());
    if (seq == v.end() || !seq->is_number_unsigned())
        fail(Errc::protocol_violation, "frame without sequence number");
    Frame frame;
    frame.type = *parsed;
    frame.seq = seq->get<std::uint64_t>();
    if (auto body = v.find("body"); body != v.end() && !body->is_null()) {
        if (!body->is_object())
            fail(Errc::protocol_violation, "frame body must be an object");
        frame.body = std::move(*body);
    }
    return frame;
}

Value change_frame_body(const ChangeEvent &change)
{
    return Value{{"scope", change.scope.to_string()},
                 {"key", change.key},
                 {"op", to_string(change.op)},
                 {"value", change.value},
                 {"version", change.version}};
}

Value attribute_frame_body(const Attribute &attribute)
{
    return Value{{"scope", attribute.scope.to_string()},
                 {"key", attribute.key},
                 {"value", attribute.value},
                 {"version", attribute.version}};
}

Value flow_body(const PlayerState &player)
{
    return Value{{"phase", to_string(player.phase)},
                 {"status", to_string(player.status)},
                 {"intro_step", player.intro_step},
                 {"reason", player.reason ? Value(*player.reason) : Value(nullptr)},
                 {"game", player.current_game ? Value(player.current_game->str()) : Value(nullptr)}};
}

Value game_body(const GameState &game)
{
    Value players = Value::array();
    for (auto &p : game.active_players())
        players.push_back(p.str());
    Value stage = nullptr;
    if (auto *s = game.current_stage()) {
        stage = Value{{"id", s->id.str()},
                      {"name", s->name},
                      {"round", game.cursor.round},
                      {"index", s->index},
                      {"duration", s->duration_s ? Value(*s->duration_s) : Value(nullptr)},
                      {"started_at", s->started_at ? Value(*s->started_at) : Value(nullptr)},
                      {"deadline", s->deadline ? Value(*s->deadline) : Value(nullptr)}};
    }
    Value round = nullptr;
    if (game.cursor.position == Cursor::Position::active && game.cursor.round < game.rounds.size())
        round = game.rounds[game.cursor.round].id.str();
    return Value{{"id", game.id.str()},
                 {"status", to_string(game.status)},
                 {"cursor", to_value(game.cursor)},
                 {"rounds", game.rounds.size()},
                 {"round", round},
                 {"stage", stage},
                 {"players", players},
                 {"treatment", game.treatment.assignments},
                 {"reason", game.end_reason ? Value(*game.end_reason) : Value(nullptr)},
                 {"paused_remaining_ms",
                  game.paused_remaining_ms ? Value(*game.paused_remaining_ms) : Value(nullptr)}};
}

Value lobby_body(const LobbyStatus &status)
{
    return Value{{"waiting_ms", status.waiting_ms},
                 {"players_present", status.players_present},
                 {"players_needed", status.players_needed}};
}

} // namespace vlab
