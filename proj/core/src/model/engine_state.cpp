// SPDX-License-Identifier: Apache-2.0
#include "vlab/model/engine_state.hpp"

#include "vlab/common/error.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace vlab {

namespace {

constexpr std::array<std::pair<BatchStatus, std::string_view>, 4> batch_statuses{{
    {BatchStatus::created, "created"},
    {BatchStatus::running, "running"},
    {BatchStatus::ended, "ended"},
    {BatchStatus::terminated, "terminated"},
}};

template <typename T>
Value optional_value(const std::optional<T> &v)
{
    return v ? Value(*v) : Value(nullptr);
}

} // namespace

std::string_view to_string(BatchStatus status) noexcept
{
    for (auto &[s, name] : batch_statuses)
        if (s == status)
            return name;
    return "?";
}

BatchStatus parse_batch_status(std::string_view text)
{
    for (auto &[s, name] : batch_statuses)
        if (name == text)
            return s;
    fail(Errc::invalid_argument, "unknown batch status: " + std::string(text));
}

std::vector<GameSlot> BatchState::assignment_slots() const
{
    std::vector<GameSlot> out;
    for (auto &s : slots)
        out.push_back(GameSlot{s.game, s.treatment, s.capacity, s.members, s.open});
    return out;
}

const LobbySlot *BatchState::slot(const GameId &game) const
{
    auto it = std::find_if(slots.begin(), slots.end(), [&](auto &s) { return s.game == game; });
    return it == slots.end() ? nullptr : &*it;
}

LobbySlot *BatchState::slot(const GameId &game)
{
    auto it = std::find_if(slots.begin(), slots.end(), [&](auto &s) { return s.game == game; });
    return it == slots.end() ? nullptr : &*it;
}

Value to_value(const LobbySlot &slot)
{
    Value members = Value::array();
    for (auto &m : slot.members)
        members.push_back(m.str());
    return Value{
        {"game", slot.game.str()},
        {"treatment", slot.treatment},
        {"capacity", slot.capacity},
        {"members", members},
        {"open", slot.open},
        {"opened_at", optional_value(slot.opened_at)},
        {"deadline", optional_value(slot.deadline)},
        {"extensions", slot.extensions},
    };
}

Value to_value(const BatchState &batch)
{
    Value slots = Value::array();
    for (auto &s : batch.slots)
        slots.push_back(to_value(s));
    return Value{
        {"id", batch.id.str()},
        {"protocol", batch.protocol.str()},
        {"spec", to_value(batch.spec)},
        {"lobby", batch.lobby.name},
        {"seed", batch.seed},
        {"draws", batch.draws},
        {"status", to_string(batch.status)},
        {"slots", slots},
    };
}

Value to_value(const EngineState &state)
{
    Value out = Value::object();
    Value players = Value::array();
    for (auto &[id, p] : state.players)
        players.push_back(to_value(p));
    Value games = Value::array();
    for (auto &[id, g] : state.games)
        games.push_back(to_value(g));
    Value batches = Value::array();
    for (auto &[id, b] : state.batches)
        batches.push_back(to_value(b));
    Value protocols = Value::array();
    for (auto &[id, p] : state.protocols)
        protocols.push_back(Value{{"id", id.str()}, {"hash", p.hash}});
    Value waitlist = Value::array();
    for (auto &p : state.waitlist)
        waitlist.push_back(p.str());
    Value attributes = Value::array();
    for (auto &a : state.attributes)
        attributes.push_back(to_value(a));
    Value logs = Value::array();
    for (auto &l : state.logs)
        logs.push_back(log_body(l));
    out["players"] = std::move(players);
    out["games"] = std::move(games);
    out["batches"] = std::move(batches);
    out["protocols"] = std::move(protocols);
    out["waitlist"] = std::move(waitlist);
    out["attributes"] = std::move(attributes);
    out["logs"] = std::move(logs);
    out["next_offset"] = state.next_offset;
    return out;
}

} // namespace vlab
