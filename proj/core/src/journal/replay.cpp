// SPDX-License-Identifier: Apache-2.0
#include "vlab/journal/replay.hpp"

#include "vlab/common/error.hpp"

#include <algorithm>

namespace vlab {

namespace {

template <typename IdT>
std::optional<IdT> optional_id(const Value &body, const char *key)
{
    if (!body.contains(key) || body[key].is_null())
        return std::nullopt;
    return IdT(body[key].get<std::string>());
}

std::optional<std::string> optional_string(const Value &body, const char *key)
{
    if (!body.contains(key) || body[key].is_null())
        return std::nullopt;
    return body[key].get<std::string>();
}

std::optional<TimeMs> optional_time(const Value &body, const char *key)
{
    if (!body.contains(key) || body[key].is_null())
        return std::nullopt;
    return body[key].get<TimeMs>();
}

[[noreturn]] void inconsistent(const EventRecord &record, const std::string &what)
{
    fail(Errc::journal_failure, "record " + std::to_string(record.offset) + " (" + std::string(to_string(record.kind)) +
                                    "): " + what);
}

PlayerState &player_at(EngineState &state, const EventRecord &record, const Value &id)
{
    auto it = state.players.find(PlayerId(id.get<std::string>()));
    if (it == state.players.end())
        inconsistent(record, "unknown player " + id.get<std::string>());
    return it->second;
}

GameState &game_at(EngineState &state, const EventRecord &record, const Value &id)
{
    auto it = state.games.find(GameId(id.get<std::string>()));
    if (it == state.games.end())
        inconsistent(record, "unknown game " + id.get<std::string>());
    return it->second;
}

BatchState &batch_at(EngineState &state, const EventRecord &record, const Value &id)
{
    auto it = state.batches.find(BatchId(id.get<std::string>()));
    if (it == state.batches.end())
        inconsistent(record, "unknown batch " + id.get<std::string>());
    return it->second;
}

LobbySlot &slot_at(EngineState &state, const EventRecord &record)
{
    auto &batch = batch_at(state, record, record.body.at("batch"));
    auto *slot = batch.slot(GameId(record.body.at("game").get<std::string>()));
    if (!slot)
        inconsistent(record, "unknown slot");
    return *slot;
}

StageState &stage_at(GameState &game, const EventRecord &record)
{
    auto r = record.body.at("round").get<std::size_t>();
    auto s = record.body.at("stage").get<std::size_t>();
    if (r >= game.rounds.size() || s >= game.rounds[r].stages.size())
        inconsistent(record, "stage out of range");
    return game.rounds[r].stages[s];
}

void apply_connection(EngineState &state, const EventRecord &record)
{
    auto &b = record.body;
    auto event = b.at("event").get<std::string>();
    if (event == "player_created") {
        PlayerState p;
        p.id = PlayerId(b.at("player").get<std::string>());
        p.identifier = b.at("identifier").get<std::string>();
        p.token_hash = b.at("token_hash").get<std::string>();
        if (state.players.count(p.id) || state.by_identifier.count(p.identifier))
            inconsistent(record, "duplicate player");
        state.by_identifier[p.identifier] = p.id;
        state.players[p.id] = std::move(p);
    } else if (event == "token_rotated") {
        player_at(state, record, b.at("player")).token_hash = b.at("token_hash").get<std::string>();
    }
}

void apply_flow(EngineState &state, const EventRecord &record)
{
    auto &b = record.body;
    auto &p = player_at(state, record, b.at("player"));
    if (parse_phase(b.at("from").get<std::string>()) != p.phase)
        inconsistent(record, "flow transition from wrong phase");
    p.phase = parse_phase(b.at("to").get<std::string>());
    p.status = parse_player_status(b.at("status").get<std::string>());
    p.intro_step = b.at("intro_step").get<std::size_t>();
    p.reason = optional_string(b, "reason");
    p.current_game = optional_id<GameId>(b, "game");
    p.batch = optional_id<BatchId>(b, "batch");
    p.lobby_since = optional_time(b, "lobby_since");
    if (p.phase != Phase::lobby)
        std::erase(state.waitlist, p.id);
}

void apply_lobby(EngineState &state, const EventRecord &record)
{
    auto &b = record.body;
    auto event = b.at("event").get<std::string>();
    if (event == "assign") {
        auto &slot = slot_at(state, record);
        PlayerId player(b.at("player").get<std::string>());
        if (!slot.open || slot.members.size() >= slot.capacity)
            inconsistent(record, "assignment into a full or closed slot");
        if (b.at("position").get<std::size_t>() != slot.members.size())
            inconsistent(record, "assignment position mismatch");
        slot.members.push_back(player);
        batch_at(state, record, b.at("batch")).draws = b.at("draws").get<std::uint64_t>();
        std::erase(state.waitlist, player);
    } else if (event == "waitlist") {
        PlayerId player(b.at("player").get<std::string>());
        if (std::find(state.waitlist.begin(), state.waitlist.end(), player) == state.waitlist.end())
            state.waitlist.push_back(player);
    } else if (event == "unwaitlist") {
        std::erase(state.waitlist, PlayerId(b.at("player").get<std::string>()));
    } else if (event == "unassign") {
        auto &slot = slot_at(state, record);
        std::erase(slot.members, PlayerId(b.at("player").get<std::string>()));
    } else if (event == "slot_timer") {
        auto &slot = slot_at(state, record);
        slot.opened_at = optional_time(b, "opened_at");
        slot.deadline = optional_time(b, "deadline");
        slot.extensions = b.at("extensions").get<int>();
    } else if (event == "slot_reset") {
        auto &slot = slot_at(state, record);
        slot.members.clear();
        slot.open = true;
        slot.opened_at.reset();
        slot.deadline.reset();
        slot.extensions = 0;
    } else if (event == "launch") {
        auto &slot = slot_at(state, record);
        auto &game = game_at(state, record, b.at("game"));
        slot.open = false;
        game.players.clear();
        for (auto &p : b.at("players"))
            game.players.emplace_back(p.get<std::string>());
    } else if (event == "batch_status") {
        batch_at(state, record, b.at("batch")).status = parse_batch_status(b.at("status").get<std::string>());
    }
}

void apply_admin(EngineState &state, const EventRecord &record)
{
    auto &b = record.body;
    auto verb = b.at("verb").get<std::string>();
    if (verb == "import_protocol") {
        StoredProtocol p{ProtocolId(b.at("protocol").get<std::string>()), b.at("text").get<std::string>(),
                         b.at("hash").get<std::string>()};
        state.protocols[p.id] = std::move(p);
    } else if (verb == "create_batch") {
        BatchState batch;
        batch.id = BatchId(b.at("batch").get<std::string>());
        batch.protocol = ProtocolId(b.at("protocol").get<std::string>());
        batch.spec = batch_spec_from_value(b.at("spec"));
        batch.lobby = lobby_config_from_value(b.at("lobby"));
        batch.seed = b.at("seed").get<std::uint64_t>();
        for (auto &g : b.at("games")) {
            GameState game;
            game.id = GameId(g.at("game").get<std::string>());
            game.batch = batch.id;
            game.treatment = treatment_from_value(g.at("treatment"));
            LobbySlot slot;
            slot.game = game.id;
            slot.treatment = game.treatment.name;
            slot.capacity = g.at("capacity").get<std::size_t>();
            batch.slots.push_back(slot);
            if (state.games.count(game.id))
                inconsistent(record, "duplicate game");
            state.games[game.id] = std::move(game);
        }
        if (state.batches.count(batch.id))
            inconsistent(record, "duplicate batch");
        state.batches[batch.id] = std::move(batch);
    } else if (verb == "start_batch") {
        batch_at(state, record, b.at("batch")).status = BatchStatus::running;
    } else if (verb == "stop_batch") {
        batch_at(state, record, b.at("batch")).status = BatchStatus::terminated;
    }
}

void apply_game(EngineState &state, const EventRecord &record)
{
    auto &b = record.body;
    auto &game = game_at(state, record, b.at("game"));
    auto event = b.at("event").get<std::string>();
    if (event == "structure") {
        game.rounds.clear();
        std::size_t r = 0;
        for (auto &round : b.at("rounds")) {
            RoundState rs;
            rs.index = r;
            rs.id = make_round_id(game.id, r);
            std::size_t s = 0;
            for (auto &stage : round.at("stages")) {
                StageState ss;
                ss.index = s;
                ss.id = make_stage_id(game.id, r, s);
                ss.name = stage.at("name").get<std::string>();
                if (!stage.at("duration").is_null())
                    ss.duration_s = stage.at("duration").get<int>();
                ss.advance_on_submit = stage.at("advance_on_submit").get<bool>();
                rs.stages.push_back(std::move(ss));
                ++s;
            }
            game.rounds.push_back(std::move(rs));
            ++r;
        }
    } else if (event == "public_key") {
        game.public_keys.insert(b.at("key").get<std::string>());
    } else if (event == "stage_start") {
        auto &stage = stage_at(game, record);
        auto next = Cursor::at(b.at("round").get<std::size_t>(), b.at("stage").get<std::size_t>());
        if (!game.cursor.precedes(next))
            inconsistent(record, "cursor moved backwards");
        game.cursor = next;
        stage.started_at = b.at("started_at").get<TimeMs>();
        stage.deadline = optional_time(b, "deadline");
    } else if (event == "submit") {
        stage_at(game, record).submitted.insert(PlayerId(b.at("player").get<std::string>()));
    } else if (event == "stage_end") {
        auto &stage = stage_at(game, record);
        if (stage.end_reason)
            inconsistent(record, "stage ended twice");
        stage.end_reason = b.at("reason").get<std::string>();
    } else if (event == "status") {
        auto status = parse_game_status(b.at("status").get<std::string>());
        if (is_terminal(game.status))
            inconsistent(record, "status change after game end");
        game.status = status;
        if (status == GameStatus::paused) {
            game.paused_remaining_ms = optional_time(b, "remaining_ms");
        } else if (status == GameStatus::running && b.contains("deadline")) {
            game.paused_remaining_ms.reset();
            auto &r = game.rounds.at(game.cursor.round);
            r.stages.at(game.cursor.stage).deadline = optional_time(b, "deadline");
        }
        if (status == GameStatus::ended)
            game.cursor = Cursor::ended();
        if (is_terminal(status))
            game.end_reason = optional_string(b, "reason");
    } else if (event == "roster_remove") {
        PlayerId player(b.at("player").get<std::string>());
        if (!game.is_member(player))
            inconsistent(record, "removal of a non-member");
        game.removed.insert(player);
    }
}

} // namespace

void Replayer::apply(const EventRecord &record)
{
    if (record.offset != next_offset_)
        inconsistent(record, "expected offset " + std::to_string(next_offset_));
    try {
        switch (record.kind) {
        case EventKind::attr_change: {
            auto &b = record.body;
            auto scope = ScopeRef::parse(b.at("scope").get<std::string>());
            auto key = b.at("key").get<std::string>();
            auto &slot = attributes_[{scope, key}];
            auto version = b.at("version").get<std::uint64_t>();
            if (version != slot.version + 1)
                inconsistent(record, "version gap on " + scope.to_string() + "/" + key);
            if (b.at("op").get<std::string>() == "append") {
                if (slot.version == 0)
                    slot.value = Value::array();
                slot.value.push_back(b.at("value"));
            } else {
                slot.value = b.at("value");
            }
            slot.scope = scope;
            slot.key = key;
            slot.version = version;
            slot.updated_at = record.at;
            slot.updated_by = b.at("actor").get<std::string>();
            break;
        }
        case EventKind::log_entry: {
            auto &b = record.body;
            state_.logs.push_back(LogEntry{ScopeRef::parse(b.at("scope").get<std::string>()),
                                           b.at("name").get<std::string>(), b.at("payload"), record.at,
                                           b.at("actor").get<std::string>(), record.offset});
            break;
        }
        case EventKind::connection_event:
            apply_connection(state_, record);
            break;
        case EventKind::flow_transition:
            apply_flow(state_, record);
            break;
        case EventKind::lobby_event:
            apply_lobby(state_, record);
            break;
        case EventKind::admin_action:
            apply_admin(state_, record);
            break;
        case EventKind::game_event:
            apply_game(state_, record);
            break;
        case EventKind::hook_fired:
            break;
        }
    } catch (const Error &) {
        throw;
    } catch (const std::exception &e) {
        inconsistent(record, e.what());
    }
    ++next_offset_;
}

EngineState Replayer::state() const
{
    EngineState out = state_;
    out.attributes.reserve(attributes_.size());
    for (auto &[k, a] : attributes_)
        out.attributes.push_back(a);
    out.next_offset = next_offset_;
    return out;
}

ReplayResult replay(const std::vector<EventRecord> &records, std::optional<std::uint64_t> up_to)
{
    Replayer replayer;
    ReplayResult result;
    for (auto &r : records) {
        if (up_to && r.offset >= *up_to)
            break;
        try {
            replayer.apply(r);
        } catch (const Error &e) {
            result.diagnostic = e.what();
            break;
        }
    }
    result.state = replayer.state();
    result.applied = replayer.next_offset();
    return result;
}

ReplayResult replay(const JournalReadResult &journal, std::optional<std::uint64_t> up_to)
{
    auto result = replay(journal.records, up_to);
    if (!result.diagnostic && journal.diagnostic)
        result.diagnostic = journal.diagnostic;
    return result;
}

} // namespace vlab
