// SPDX-License-Identifier: Apache-2.0
#include "vlab/bots/bot.hpp"

#include "vlab/common/crypto.hpp"
#include "vlab/common/error.hpp"
#include "vlab/sync/wire.hpp"

namespace vlab {

namespace {

std::string text_or(const Value &v, const char *key, std::string fallback = {})
{
    if (!v.is_object())
        return fallback;
    auto it = v.find(key);
    return it != v.end() && it->is_string() ? it->get<std::string>() : fallback;
}

} // namespace

BotClient::BotClient(Scheduler &scheduler, Connector connector, BotScript script, std::string identifier,
                     std::uint64_t seed)
    : scheduler_(scheduler), connector_(std::move(connector)), script_(std::move(script)),
      identifier_(std::move(identifier)), rng_(seed), strand_(scheduler.make_strand("bot:" + identifier_))
{
}

BotClient::~BotClient() = default;

void BotClient::start()
{
    strand_->post([this] { connect(); });
}

void BotClient::kill()
{
    strand_->post([this] {
        killed_ = true;
        ++generation_;
        if (channel_)
            channel_->close();
        channel_.reset();
        std::lock_guard lock(status_mutex_);
        status_.connected = false;
    });
}

void BotClient::reconnect()
{
    strand_->post([this] {
        killed_ = false;
        connect();
    });
}

BotClient::Status BotClient::status() const
{
    std::lock_guard lock(status_mutex_);
    return status_;
}

void BotClient::set_done(bool done)
{
    std::lock_guard lock(status_mutex_);
    status_.done = done;
}

void BotClient::connect()
{
    auto generation = ++generation_;
    in_seq_ = 0;
    out_seq_ = 0;
    if (channel_)
        channel_->close();
    channel_ = connector_(ChannelEvents{
        strand_,
        [this, generation](std::string text) { on_frame(generation, std::move(text)); },
        [this, generation] { on_closed(generation); },
    });
    {
        std::lock_guard lock(status_mutex_);
        status_.connected = true;
    }
    Value hello = Value::object();
    if (!token_.empty())
        hello["token"] = token_;
    else
        hello["identifier"] = identifier_;
    send("hello", std::move(hello));
}

void BotClient::send(const char *type, Value body)
{
    if (!channel_ || silent_ || killed_)
        return;
    Frame frame{*parse_frame_type(type), ++out_seq_, std::move(body)};
    auto text = encode_frame(frame);
    transcript_.push_back({scheduler_.now(), true, text});
    channel_->send(std::move(text));
}

void BotClient::on_closed(std::uint64_t generation)
{
    if (generation != generation_)
        return;
    ++generation_;
    if (channel_)
        channel_->close();
    channel_.reset();
    std::lock_guard lock(status_mutex_);
    status_.connected = false;
    if (silent_)
        status_.done = true;
}

void BotClient::on_frame(std::uint64_t generation, std::string text)
{
    if (generation != generation_)
        return;
    transcript_.push_back({scheduler_.now(), false, text});
    Frame frame;
    try {
        frame = decode_frame(text);
    } catch (const Error &e) {
        violations_.push_back(std::string("undecodable frame: ") + e.what());
        return;
    }
    if (frame.seq <= in_seq_)
        violations_.push_back("server sequence went from " + std::to_string(in_seq_) + " to " +
                              std::to_string(frame.seq));
    in_seq_ = frame.seq;
    auto &body = frame.body;
    switch (frame.type) {
    case FrameType::welcome:
        ++welcomes_;
        player_ = text_or(body, "player");
        if (auto t = text_or(body, "token"); !t.empty())
            token_ = t;
        view_.clear();
        received_.clear();
        apply_snapshot(body.value("attributes", Value::array()), true);
        handled_stage_.clear();
        acted_flow_.clear();
        absorb(body);
        act();
        break;
    case FrameType::transition:
        if (body.contains("attributes"))
            apply_snapshot(body["attributes"], false);
        absorb(body);
        act();
        break;
    case FrameType::change:
        apply_change(body);
        break;
    case FrameType::heartbeat:
        send("heartbeat_ack", Value::object());
        break;
    case FrameType::heartbeat_ack:
        break;
    case FrameType::error: {
        BotError err{scheduler_.now(), std::nullopt, text_or(body, "code"), text_or(body, "message")};
        if (body.contains("ref") && body["ref"].is_number_unsigned())
            err.ref = body["ref"].get<std::uint64_t>();
        if (err.code == "protocol-violation")
            violations_.push_back("server reported protocol violation: " + err.message);
        errors_.push_back(std::move(err));
        break;
    }
    default:
        violations_.push_back("unexpected frame type " + std::string(to_string(frame.type)));
    }
}

void BotClient::apply_snapshot(const Value &attributes, bool replace)
{
    if (!attributes.is_array())
        return;
    for (auto &a : attributes) {
        std::pair key{a.at("scope").get<std::string>(), a.at("key").get<std::string>()};
        auto version = a.at("version").get<std::uint64_t>();
        auto &entry = view_[key];
        if (replace || version > entry.version) {
            entry.value = a.at("value");
            entry.version = version;
        }
    }
}

void BotClient::apply_change(const Value &body)
{
    std::pair key{body.at("scope").get<std::string>(), body.at("key").get<std::string>()};
    auto version = body.at("version").get<std::uint64_t>();
    auto &seen = received_[key];
    auto &entry = view_[key];
    if (version <= entry.version) {
        violations_.push_back("version " + std::to_string(version) + " for " + key.first + "/" + key.second +
                              " after " + std::to_string(entry.version));
        return;
    }
    seen.push_back(version);
    if (text_or(body, "op") == "append") {
        if (version != entry.version + 1 || !(entry.value.is_array() || entry.value.is_null())) {
            // Missed an element; ask for a fresh snapshot.
            entry.version = version;
            send("subscribe", Value::object());
            return;
        }
        if (entry.value.is_null())
            entry.value = Value::array();
        entry.value.push_back(body.at("value"));
    } else {
        entry.value = body.at("value");
    }
    entry.version = version;
}

void BotClient::absorb(const Value &body)
{
    if (body.contains("flow") && body["flow"].is_object())
        flow_ = body["flow"];
    if (body.contains("game"))
        game_ = body["game"];
    std::lock_guard lock(status_mutex_);
    status_.player = player_;
    status_.phase = text_or(flow_, "phase");
    status_.reason = text_or(flow_, "reason");
}

void BotClient::act()
{
    if (silent_ || killed_)
        return;
    auto phase = text_or(flow_, "phase");
    if (phase == "consent") {
        if (acted_flow_ != "consent") {
            acted_flow_ = "consent";
            send("submit", Value{{"step", "consent"}});
        }
    } else if (phase == "intro") {
        auto key = "intro:" + std::to_string(flow_.value("intro_step", 0));
        if (acted_flow_ != key) {
            acted_flow_ = key;
            send("submit", Value{{"step", "intro"}});
        }
    } else if (phase == "game") {
        if (!game_.is_object() || text_or(game_, "status") != "running" || !game_["stage"].is_object())
            return;
        auto &stage = game_["stage"];
        auto id = text_or(stage, "id");
        if (id != handled_stage_)
            start_stage(id, stage.value("round", std::size_t(0)), text_or(stage, "name"));
    } else if (phase == "outro") {
        if (!script_.survey) {
            set_done(true);
        } else if (acted_flow_ != "survey") {
            acted_flow_ = "survey";
            send("submit", Value{{"step", "survey"}});
        }
    } else if (phase == "exited") {
        set_done(true);
    }
}

void BotClient::start_stage(const std::string &stage_id, std::size_t round, const std::string &name)
{
    handled_stage_ = stage_id;
    auto label = std::to_string(round) + "/" + name;
    if (stages_acted_.empty() || stages_acted_.back() != label)
        stages_acted_.push_back(label);
    if (script_.silent && script_.silent->matches(round, name)) {
        silent_ = true;
        set_done(true);
        return;
    }
    if (script_.drop && !dropped_once_ && script_.drop->when.matches(round, name)) {
        dropped_once_ = true;
        auto plan = *script_.drop;
        strand_->post_at(scheduler_.now() + plan.after_ms, [this, plan] {
            killed_ = true;
            ++generation_;
            if (channel_)
                channel_->close();
            channel_.reset();
            {
                std::lock_guard lock(status_mutex_);
                status_.connected = false;
            }
            if (plan.reconnect_after_ms)
                strand_->post_at(scheduler_.now() + *plan.reconnect_after_ms, [this] {
                    killed_ = false;
                    connect();
                });
            else
                set_done(true);
        });
    }

    steps_.clear();
    const auto *handler = script_.handler_for(round, name);
    auto think = handler && handler->think ? *handler->think : script_.think;
    if (handler) {
        for (auto &action : handler->actions) {
            if (action.kind == BotAction::Kind::fuzz) {
                for (int i = 0; i < action.count; ++i)
                    steps_.push_back({action.gap.draw(rng_), &action, true});
            } else {
                steps_.push_back({0, &action, false});
            }
        }
    } else if (script_.submit_unhandled) {
        static const BotAction plain_submit{};
        steps_.push_back({0, &plain_submit, false});
    }
    if (steps_.empty())
        return;
    steps_[0].delay += think.draw(rng_);
    strand_->post_at(scheduler_.now() + steps_[0].delay, [this, stage_id] { run_step(stage_id, 0); });
}

bool BotClient::stage_live(const std::string &stage_id) const
{
    return game_.is_object() && text_or(game_, "status") == "running" && game_["stage"].is_object() &&
           text_or(game_["stage"], "id") == stage_id;
}

std::optional<std::string> BotClient::scope_text(ScopeSlot slot) const
{
    auto game = text_or(game_, "id");
    auto round = text_or(game_, "round");
    auto stage = game_.is_object() ? text_or(game_["stage"], "id") : std::string();
    switch (slot) {
    case ScopeSlot::game:
        return game.empty() ? std::nullopt : std::optional("game:" + game);
    case ScopeSlot::round:
        return round.empty() ? std::nullopt : std::optional("round:" + round);
    case ScopeSlot::stage:
        return stage.empty() ? std::nullopt : std::optional("stage:" + stage);
    case ScopeSlot::player:
        return "player:" + player_;
    case ScopeSlot::player_round:
        return round.empty() ? std::nullopt : std::optional("player_round:" + round + ":" + player_);
    case ScopeSlot::player_stage:
        return stage.empty() ? std::nullopt : std::optional("player_stage:" + stage + ":" + player_);
    }
    return std::nullopt;
}

void BotClient::run_step(std::string stage_id, std::size_t index)
{
    if (silent_ || killed_ || stage_id != handled_stage_ || index >= steps_.size())
        return;
    if (!stage_live(stage_id)) {
        if (text_or(game_, "status") == "paused")
            handled_stage_.clear();
        return;
    }
    auto &step = steps_[index];
    auto &action = *step.action;
    if (step.fuzz) {
        auto slot = action.scopes[uniform_index(rng_, action.scopes.size())];
        auto &key = action.keys[uniform_index(rng_, action.keys.size())];
        bool append = uniform_real(rng_, 0.0, 1.0) < action.append_ratio;
        auto value = uniform_int(rng_, 0, 1'000'000);
        if (auto scope = scope_text(slot))
            send("change", Value{{"scope", *scope},
                                 {"key", append ? key + "_list" : key},
                                 {"op", append ? "append" : "set"},
                                 {"value", value}});
    } else if (action.kind == BotAction::Kind::submit) {
        send("submit", Value{{"step", "stage"}, {"stage", stage_id}});
    } else {
        auto value = action.value.draw(rng_);
        if (auto scope = scope_text(action.scope))
            send("change", Value{{"scope", *scope},
                                 {"key", action.key},
                                 {"op", action.kind == BotAction::Kind::append ? "append" : "set"},
                                 {"value", std::move(value)}});
    }
    if (index + 1 < steps_.size())
        strand_->post_at(scheduler_.now() + steps_[index + 1].delay,
                         [this, stage_id, next = index + 1] { run_step(stage_id, next); });
}

} // namespace vlab
