// SPDX-License-Identifier: Apache-2.0
#include "vlab/sync/hub.hpp"

#include "vlab/common/error.hpp"
#include "vlab/sync/visibility.hpp"

#include <chrono>

namespace vlab {

struct Hub::Outlet {
    ConnectionId id = 0;
    std::shared_ptr<Connection> connection;

    std::mutex mutex;
    std::optional<PlayerId> player;
    bool hello_pending = false;
    bool closed = false;
    bool lost = false;
    std::uint64_t out_seq = 0;
    std::uint64_t in_seq = 0;
    TimeMs last_seen = 0;
    Liveness liveness = Liveness::alive;
    // Highest version delivered per key; older deliveries are dropped.
    std::map<std::pair<ScopeRef, std::string>, std::uint64_t> versions;
};

namespace {

std::int64_t steady_ns()
{
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::optional<std::string> optional_text(const Value &body, const char *key)
{
    auto it = body.find(key);
    if (it == body.end() || it->is_null())
        return std::nullopt;
    if (!it->is_string())
        fail(Errc::protocol_violation, std::string(key) + " must be a string");
    return it->get<std::string>();
}

} // namespace

Hub::Hub(Engine &engine, HubOptions options)
    : engine_(engine), options_(options), strand_(engine.scheduler().make_strand("hub"))
{
}

Hub::~Hub()
{
    stop();
}

void Hub::stop()
{
    stopped_ = true;
}

std::size_t Hub::connection_count() const
{
    std::lock_guard lock(mutex_);
    return outlets_.size();
}

std::optional<PlayerId> Hub::player_of(ConnectionId id) const
{
    auto outlet = find(id);
    if (!outlet)
        return std::nullopt;
    std::lock_guard lock(outlet->mutex);
    return outlet->player;
}

std::shared_ptr<Hub::Outlet> Hub::find(ConnectionId id) const
{
    std::lock_guard lock(mutex_);
    auto it = outlets_.find(id);
    return it == outlets_.end() ? nullptr : it->second;
}

std::shared_ptr<Hub::Outlet> Hub::outlet_for(const PlayerId &player) const
{
    std::lock_guard lock(mutex_);
    auto it = by_player_.find(player);
    if (it == by_player_.end())
        return nullptr;
    auto o = outlets_.find(it->second);
    return o == outlets_.end() ? nullptr : o->second;
}

Hub::ConnectionId Hub::attach(std::shared_ptr<Connection> connection)
{
    auto outlet = std::make_shared<Outlet>();
    outlet->connection = std::move(connection);
    outlet->last_seen = engine_.scheduler().now();
    {
        std::lock_guard lock(mutex_);
        outlet->id = next_id_++;
        outlets_[outlet->id] = outlet;
    }
    arm_tick();
    return outlet->id;
}

void Hub::detach(ConnectionId id)
{
    std::shared_ptr<Outlet> outlet;
    {
        std::lock_guard lock(mutex_);
        auto it = outlets_.find(id);
        if (it == outlets_.end())
            return;
        outlet = it->second;
        outlets_.erase(it);
    }
    {
        std::lock_guard lock(outlet->mutex);
        outlet->closed = true;
    }
    engine_.control()->post([this, outlet] { lost(outlet, "disconnected"); });
}

void Hub::lost(const std::shared_ptr<Outlet> &outlet, std::string_view event)
{
    std::optional<PlayerId> player;
    {
        std::lock_guard lock(outlet->mutex);
        if (outlet->lost)
            return;
        outlet->lost = true;
        outlet->closed = true;
        player = outlet->player;
    }
    if (!player)
        return;
    {
        std::lock_guard lock(mutex_);
        auto it = by_player_.find(*player);
        if (it == by_player_.end() || it->second != outlet->id)
            return;
        by_player_.erase(it);
    }
    engine_.record_connection(*player, event);
    engine_.player_offline(*player);
}

void Hub::send(Outlet &outlet, FrameType type, Value body)
{
    if (outlet.closed)
        return;
    Frame frame{type, ++outlet.out_seq, std::move(body)};
    outlet.connection->send(encode_frame(frame));
}

void Hub::send_error(Outlet &outlet, std::optional<std::uint64_t> ref, Errc code, const std::string &message)
{
    send(outlet, FrameType::error,
         Value{{"ref", ref ? Value(*ref) : Value(nullptr)}, {"code", to_string(code)}, {"message", message}});
}

void Hub::send_error(const std::shared_ptr<Outlet> &outlet, std::optional<std::uint64_t> ref, std::exception_ptr error)
{
    Errc code = Errc::invalid_argument;
    std::string message;
    try {
        std::rethrow_exception(error);
    } catch (const Error &e) {
        code = e.code();
        message = e.what();
    } catch (const std::exception &e) {
        message = e.what();
    }
    std::lock_guard lock(outlet->mutex);
    send_error(*outlet, ref, code, message);
}

void Hub::receive(ConnectionId id, std::string_view text)
{
    auto outlet = find(id);
    if (!outlet)
        return;
    Frame frame;
    bool revived = false;
    std::optional<PlayerId> player;
    {
        std::lock_guard lock(outlet->mutex);
        if (outlet->closed)
            return;
        try {
            frame = decode_frame(text);
            if (frame.seq <= outlet->in_seq)
                fail(Errc::protocol_violation, "sequence number " + std::to_string(frame.seq) + " after " +
                                                   std::to_string(outlet->in_seq));
        } catch (const Error &e) {
            send_error(*outlet, std::nullopt, e.code(), e.what());
            return;
        }
        outlet->in_seq = frame.seq;
        outlet->last_seen = engine_.scheduler().now();
        if (outlet->liveness != Liveness::alive) {
            outlet->liveness = Liveness::alive;
            revived = true;
            player = outlet->player;
        }
    }
    if (revived && player)
        engine_.record_connection(*player, "alive");
    dispatch(outlet, std::move(frame));
}

void Hub::dispatch(const std::shared_ptr<Outlet> &outlet, Frame frame)
{
    auto ref = frame.seq;
    std::optional<PlayerId> player;
    try {
        {
            std::lock_guard lock(outlet->mutex);
            player = outlet->player;
            switch (frame.type) {
            case FrameType::heartbeat:
                send(*outlet, FrameType::heartbeat_ack, Value::object());
                return;
            case FrameType::heartbeat_ack:
                return;
            case FrameType::hello:
                if (outlet->player || outlet->hello_pending)
                    fail(Errc::protocol_violation, "session already established");
                outlet->hello_pending = true;
                break;
            case FrameType::change:
            case FrameType::submit:
            case FrameType::subscribe:
                if (!outlet->player)
                    fail(Errc::protocol_violation, "hello must come first");
                break;
            default:
                fail(Errc::protocol_violation, "clients may not send " + std::string(to_string(frame.type)));
            }
        }
        auto &body = frame.body;
        switch (frame.type) {
        case FrameType::hello: {
            auto token = optional_text(body, "token");
            auto identifier = optional_text(body, "identifier");
            engine_.control()->post([this, outlet, ref, token, identifier] { do_hello(outlet, ref, token, identifier); });
            break;
        }
        case FrameType::change: {
            auto scope_text = optional_text(body, "scope");
            auto key = optional_text(body, "key");
            auto op_text = optional_text(body, "op").value_or("set");
            if (!scope_text || !key)
                fail(Errc::invalid_argument, "change needs scope and key");
            if (op_text != "set" && op_text != "append")
                fail(Errc::invalid_argument, "unknown op " + op_text);
            auto scope = ScopeRef::parse(*scope_text);
            auto value = body.contains("value") ? body["value"] : Value(nullptr);
            engine_.client_write(*player, scope, *key, op_text == "set" ? ChangeOp::set : ChangeOp::append,
                                 std::move(value), [this, outlet, ref](std::exception_ptr e) {
                                     if (e)
                                         send_error(outlet, ref, e);
                                 });
            break;
        }
        case FrameType::submit: {
            auto step = parse_submit_step(optional_text(body, "step").value_or("stage"));
            if (!step)
                fail(Errc::invalid_argument, "unknown submit step");
            SubmitRequest request{*step, std::nullopt};
            if (auto stage = optional_text(body, "stage"))
                request.stage = StageId(*stage);
            engine_.client_submit(*player, request, [this, outlet, ref](std::exception_ptr e) {
                if (e)
                    send_error(outlet, ref, e);
            });
            break;
        }
        case FrameType::subscribe:
            engine_.control()->post([this, outlet] { do_resync(outlet); });
            break;
        default:
            break;
        }
    } catch (...) {
        send_error(outlet, ref, std::current_exception());
    }
}

void Hub::do_hello(const std::shared_ptr<Outlet> &outlet, std::uint64_t ref, std::optional<std::string> token,
                   std::optional<std::string> identifier)
{
    HelloResult hello;
    try {
        hello = engine_.hello(token, identifier);
    } catch (...) {
        {
            std::lock_guard lock(outlet->mutex);
            outlet->hello_pending = false;
        }
        send_error(outlet, ref, std::current_exception());
        return;
    }

    std::shared_ptr<Outlet> previous;
    {
        std::lock_guard lock(mutex_);
        if (auto it = by_player_.find(hello.player); it != by_player_.end() && it->second != outlet->id) {
            auto o = outlets_.find(it->second);
            if (o != outlets_.end())
                previous = o->second;
            by_player_.erase(it);
        }
    }
    if (previous) {
        {
            std::lock_guard lock(previous->mutex);
            send_error(*previous, std::nullopt, Errc::second_login, "session continued on another connection");
            previous->closed = true;
            previous->lost = true;
            previous->player.reset();
        }
        previous->connection->close();
        engine_.record_connection(hello.player, "second_login");
    }

    {
        std::lock_guard lock(outlet->mutex);
        if (outlet->closed)
            return;
        {
            std::lock_guard hub_lock(mutex_);
            by_player_[hello.player] = outlet->id;
        }
        outlet->player = hello.player;
        outlet->hello_pending = false;
        outlet->versions.clear();
        auto body = welcome_body(*outlet, hello.player);
        if (!hello.token.empty())
            body["token"] = hello.token;
        body["created"] = hello.created;
        body["resumed"] = hello.resumed;
        send(*outlet, FrameType::welcome, std::move(body));
    }
    engine_.record_connection(hello.player, "connected");
    engine_.player_online(hello.player);
}

void Hub::do_resync(const std::shared_ptr<Outlet> &outlet)
{
    std::lock_guard lock(outlet->mutex);
    if (!outlet->player || outlet->closed)
        return;
    outlet->versions.clear();
    auto body = welcome_body(*outlet, *outlet->player);
    body["resumed"] = true;
    send(*outlet, FrameType::welcome, std::move(body));
}

Value Hub::snapshot_attributes(Outlet &outlet, const PlayerId &player)
{
    // Collect candidates first; the store and the state lock must not nest.
    auto game = engine_.with_state([&](const EngineState &s) -> std::optional<std::pair<GameId, std::vector<PlayerId>>> {
        auto *g = visible_game(s, player);
        if (!g)
            return std::nullopt;
        return std::pair{g->id, g->players};
    });
    auto candidates = engine_.store().attributes_of(ScopeRef::player(player));
    if (game) {
        auto game_attrs = engine_.store().game_attributes(game->first);
        candidates.insert(candidates.end(), game_attrs.begin(), game_attrs.end());
        for (auto &mate : game->second) {
            if (mate == player)
                continue;
            auto theirs = engine_.store().attributes_of(ScopeRef::player(mate));
            candidates.insert(candidates.end(), theirs.begin(), theirs.end());
        }
    }
    Value out = Value::array();
    engine_.with_state([&](const EngineState &s) {
        for (auto &a : candidates) {
            if (!can_see(s, player, a.scope, a.key))
                continue;
            auto &seen = outlet.versions[{a.scope, a.key}];
            seen = std::max(seen, a.version);
            out.push_back(attribute_frame_body(a));
        }
        return 0;
    });
    return out;
}

Value Hub::transition_body(Outlet &outlet, const PlayerId &player, bool with_attributes)
{
    auto state = engine_.player(player);
    if (!state)
        return Value::object();
    Value body{{"flow", flow_body(*state)}, {"game", nullptr}, {"lobby", nullptr}};
    auto game = engine_.with_state([&](const EngineState &s) -> std::optional<GameState> {
        auto *g = visible_game(s, player);
        return g ? std::optional<GameState>(*g) : std::nullopt;
    });
    if (game)
        body["game"] = game_body(*game);
    if (state->phase == Phase::lobby)
        body["lobby"] = lobby_body(engine_.lobby_status_for(player));
    if (with_attributes)
        body["attributes"] = snapshot_attributes(outlet, player);
    return body;
}

Value Hub::welcome_body(Outlet &outlet, const PlayerId &player)
{
    auto body = transition_body(outlet, player, true);
    body["player"] = player.str();
    body["heartbeat"] = Value{{"interval_ms", options_.heartbeat.interval_ms()},
                              {"misses", options_.heartbeat.misses_allowed}};
    return body;
}

void Hub::on_change(const ChangeEvent &change)
{
    auto players = engine_.with_state([&](const EngineState &s) { return audience(s, change.scope, change.key); });
    for (auto &p : players) {
        auto outlet = outlet_for(p);
        if (!outlet)
            continue;
        std::lock_guard lock(outlet->mutex);
        if (outlet->closed || outlet->player != p)
            continue;
        auto &seen = outlet->versions[{change.scope, change.key}];
        if (change.version <= seen)
            continue;
        seen = change.version;
        send(*outlet, FrameType::change, change_frame_body(change));
        if (change.committed_ns)
            latency_.record(steady_ns() - change.committed_ns);
    }
    if (downstream_)
        downstream_->on_change(change);
}

void Hub::on_player_update(const PlayerId &player)
{
    if (auto outlet = outlet_for(player)) {
        std::lock_guard lock(outlet->mutex);
        if (!outlet->closed && outlet->player == player)
            send(*outlet, FrameType::transition, transition_body(*outlet, player, false));
    }
    if (downstream_)
        downstream_->on_player_update(player);
}

void Hub::on_game_update(const GameId &game, bool entered)
{
    auto members = engine_.with_state([&](const EngineState &s) {
        auto it = s.games.find(game);
        return it == s.games.end() ? std::vector<PlayerId>{} : it->second.active_players();
    });
    for (auto &p : members) {
        auto outlet = outlet_for(p);
        if (!outlet)
            continue;
        std::lock_guard lock(outlet->mutex);
        if (!outlet->closed && outlet->player == p)
            send(*outlet, FrameType::transition, transition_body(*outlet, p, entered));
    }
    if (downstream_)
        downstream_->on_game_update(game, entered);
}

void Hub::on_lobby_update(const BatchId &batch, const GameId &game)
{
    auto members = engine_.with_state([&](const EngineState &s) {
        auto b = s.batches.find(batch);
        if (b == s.batches.end())
            return std::vector<PlayerId>{};
        auto *slot = b->second.slot(game);
        return slot && slot->open ? slot->members : std::vector<PlayerId>{};
    });
    for (auto &p : members) {
        auto outlet = outlet_for(p);
        if (!outlet)
            continue;
        std::lock_guard lock(outlet->mutex);
        if (!outlet->closed && outlet->player == p)
            send(*outlet, FrameType::transition, transition_body(*outlet, p, false));
    }
    if (downstream_)
        downstream_->on_lobby_update(batch, game);
}

void Hub::arm_tick()
{
    {
        std::lock_guard lock(mutex_);
        if (tick_armed_ || stopped_)
            return;
        tick_armed_ = true;
    }
    strand_->post_at(engine_.scheduler().now() + options_.heartbeat.interval_ms(), [this] { tick(); });
}

void Hub::tick()
{
    std::vector<std::shared_ptr<Outlet>> outlets;
    {
        std::lock_guard lock(mutex_);
        tick_armed_ = false;
        for (auto &[id, o] : outlets_)
            outlets.push_back(o);
    }
    if (stopped_)
        return;
    auto now = engine_.scheduler().now();
    for (auto &outlet : outlets) {
        std::optional<PlayerId> player;
        Liveness before, after;
        {
            std::lock_guard lock(outlet->mutex);
            if (outlet->closed)
                continue;
            before = outlet->liveness;
            after = heartbeat_check(outlet->last_seen, now, options_.heartbeat.interval_ms(),
                                    options_.heartbeat.misses_allowed);
            outlet->liveness = after;
            player = outlet->player;
            if (after == Liveness::dead)
                outlet->closed = true;
            else
                send(*outlet, FrameType::heartbeat, Value{{"at", now}});
        }
        if (after == before)
            continue;
        if (after == Liveness::stale && player)
            engine_.record_connection(*player, "stale");
        if (after == Liveness::dead) {
            outlet->connection->close();
            engine_.control()->post([this, outlet] { lost(outlet, "dead"); });
        }
    }
    bool any;
    {
        std::lock_guard lock(mutex_);
        any = !outlets_.empty();
    }
    if (any)
        arm_tick();
}

} // namespace vlab
