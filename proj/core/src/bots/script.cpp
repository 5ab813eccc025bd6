// SPDX-License-Identifier: Apache-2.0
#include "vlab/bots/script.hpp"

#include "../common/yaml_util.hpp"
#include "vlab/common/crypto.hpp"

#include <array>

namespace vlab {

namespace {

constexpr std::array<std::pair<ScopeSlot, std::string_view>, 6> slot_names{{
    {ScopeSlot::game, "game"},
    {ScopeSlot::round, "round"},
    {ScopeSlot::stage, "stage"},
    {ScopeSlot::player, "player"},
    {ScopeSlot::player_round, "player_round"},
    {ScopeSlot::player_stage, "player_stage"},
}};

ThinkTime parse_think(const YAML::Node &node, const std::string &what)
{
    ThinkTime t;
    if (node.IsScalar()) {
        t.min_ms = t.max_ms = yaml::integer(node, what);
    } else {
        yaml::expect_map(node, what);
        yaml::check_keys(node, {"min", "max"}, what);
        if (node["min"])
            t.min_ms = yaml::integer(node["min"], what + ".min");
        t.max_ms = node["max"] ? yaml::integer(node["max"], what + ".max") : t.min_ms;
    }
    if (t.min_ms < 0 || t.max_ms < t.min_ms)
        yaml::invalid(node, what + " needs 0 <= min <= max");
    return t;
}

ScopeSlot parse_slot(const YAML::Node &node, const std::string &what)
{
    auto text = yaml::text(node, what);
    auto slot = parse_scope_slot(text);
    if (!slot)
        yaml::invalid(node, "unknown scope '" + text + "' in " + what);
    return *slot;
}

StageMatch parse_match(const YAML::Node &node, const std::string &what)
{
    yaml::expect_map(node, what);
    StageMatch m;
    if (auto r = node["round"]; r && r.Scalar() != "any")
        m.round = yaml::integer(r, what + ".round");
    if (auto s = node["stage"]; s && s.Scalar() != "any")
        m.stage = yaml::text(s, what + ".stage");
    return m;
}

ValueGen parse_value(const YAML::Node &action)
{
    ValueGen gen;
    if (auto n = action["random_int"]) {
        yaml::expect_seq(n, "random_int");
        if (n.size() != 2)
            yaml::invalid(n, "random_int needs [lo, hi]");
        gen.kind = ValueGen::Kind::random_int;
        gen.lo = yaml::integer(n[0], "random_int");
        gen.hi = yaml::integer(n[1], "random_int");
    } else if (auto n = action["random_real"]) {
        yaml::expect_seq(n, "random_real");
        if (n.size() != 2)
            yaml::invalid(n, "random_real needs [lo, hi]");
        gen.kind = ValueGen::Kind::random_real;
        gen.lo = yaml::number(n[0], "random_real");
        gen.hi = yaml::number(n[1], "random_real");
    } else if (auto n = action["choice"]) {
        yaml::expect_seq(n, "choice");
        if (n.size() == 0)
            yaml::invalid(n, "choice needs at least one value");
        gen.kind = ValueGen::Kind::choice;
        for (auto c : n)
            gen.choices.push_back(yaml::to_value(c));
    } else {
        gen.literal = yaml::to_value(action["value"]);
    }
    if (gen.kind != ValueGen::Kind::literal && gen.kind != ValueGen::Kind::choice && gen.hi < gen.lo)
        yaml::invalid(action, "random range needs lo <= hi");
    return gen;
}

BotAction parse_action(const YAML::Node &node)
{
    BotAction a;
    if (node.IsScalar()) {
        if (node.Scalar() != "submit")
            yaml::invalid(node, "unknown action '" + node.Scalar() + "'");
        return a;
    }
    yaml::expect_map(node, "action");
    if (node.size() != 1)
        yaml::invalid(node, "an action has exactly one verb");
    auto verb = node.begin()->first.as<std::string>();
    auto body = node.begin()->second;
    if (verb == "submit") {
        a.kind = BotAction::Kind::submit;
    } else if (verb == "set" || verb == "append") {
        a.kind = verb == "set" ? BotAction::Kind::set : BotAction::Kind::append;
        yaml::expect_map(body, verb);
        yaml::check_keys(body, {"scope", "key", "value", "random_int", "random_real", "choice"}, verb);
        if (body["scope"])
            a.scope = parse_slot(body["scope"], verb + ".scope");
        if (!body["key"])
            yaml::invalid(body, verb + " needs a key");
        a.key = yaml::text(body["key"], verb + ".key");
        a.value = parse_value(body);
    } else if (verb == "fuzz") {
        a.kind = BotAction::Kind::fuzz;
        yaml::expect_map(body, "fuzz");
        yaml::check_keys(body, {"count", "scopes", "keys", "append_ratio", "gap"}, "fuzz");
        a.count = body["count"] ? yaml::integer(body["count"], "fuzz.count") : 1;
        if (auto s = body["scopes"]) {
            yaml::expect_seq(s, "fuzz.scopes");
            for (auto x : s)
                a.scopes.push_back(parse_slot(x, "fuzz.scopes"));
        } else {
            a.scopes = {ScopeSlot::game, ScopeSlot::player, ScopeSlot::player_stage};
        }
        if (auto k = body["keys"]) {
            yaml::expect_seq(k, "fuzz.keys");
            for (auto x : k)
                a.keys.push_back(yaml::text(x, "fuzz.keys"));
        } else {
            a.keys = {"k0", "k1", "k2", "k3"};
        }
        if (a.scopes.empty() || a.keys.empty() || a.count < 0)
            yaml::invalid(body, "fuzz needs scopes, keys and a non-negative count");
        if (body["append_ratio"])
            a.append_ratio = yaml::number(body["append_ratio"], "fuzz.append_ratio");
        if (body["gap"])
            a.gap = parse_think(body["gap"], "fuzz.gap");
    } else {
        yaml::invalid(node, "unknown action '" + verb + "'");
    }
    return a;
}

BotScript parse_script_node(const YAML::Node &node, bool allow_count)
{
    yaml::expect_map(node, "bot script");
    if (allow_count)
        yaml::check_keys(node,
                         {"name", "seed", "think", "handlers", "submit_unhandled", "survey", "silent", "drop", "count"},
                         "bot script");
    else
        yaml::check_keys(node, {"name", "seed", "think", "handlers", "submit_unhandled", "survey", "silent", "drop"},
                         "bot script");
    BotScript s;
    if (node["name"])
        s.name = yaml::text(node["name"], "name");
    if (node["seed"])
        s.seed = static_cast<std::uint64_t>(yaml::integer(node["seed"], "seed"));
    if (node["think"])
        s.think = parse_think(node["think"], "think");
    if (node["submit_unhandled"])
        s.submit_unhandled = yaml::boolean(node["submit_unhandled"], "submit_unhandled");
    if (node["survey"])
        s.survey = yaml::boolean(node["survey"], "survey");
    if (auto h = node["handlers"]) {
        yaml::expect_seq(h, "handlers");
        for (auto item : h) {
            yaml::expect_map(item, "handler");
            yaml::check_keys(item, {"round", "stage", "think", "actions"}, "handler");
            StageHandler handler;
            handler.when = parse_match(item, "handler");
            if (item["think"])
                handler.think = parse_think(item["think"], "handler.think");
            if (auto acts = item["actions"]) {
                yaml::expect_seq(acts, "handler.actions");
                for (auto a : acts)
                    handler.actions.push_back(parse_action(a));
            }
            s.handlers.push_back(std::move(handler));
        }
    }
    if (auto n = node["silent"]) {
        yaml::check_keys(n, {"round", "stage"}, "silent");
        s.silent = parse_match(n, "silent");
    }
    if (auto n = node["drop"]) {
        yaml::check_keys(n, {"round", "stage", "after_ms", "reconnect_after_ms"}, "drop");
        DropPlan plan;
        plan.when = parse_match(n, "drop");
        if (n["after_ms"])
            plan.after_ms = yaml::integer(n["after_ms"], "drop.after_ms");
        if (n["reconnect_after_ms"] && !n["reconnect_after_ms"].IsNull())
            plan.reconnect_after_ms = yaml::integer(n["reconnect_after_ms"], "drop.reconnect_after_ms");
        s.drop = plan;
    }
    return s;
}

} // namespace

TimeMs ThinkTime::draw(std::mt19937_64 &rng) const
{
    if (max_ms <= min_ms)
        return min_ms;
    return uniform_int(rng, min_ms, max_ms);
}

std::string_view to_string(ScopeSlot slot) noexcept
{
    for (auto &[s, name] : slot_names)
        if (s == slot)
            return name;
    return "game";
}

std::optional<ScopeSlot> parse_scope_slot(std::string_view text) noexcept
{
    for (auto &[s, name] : slot_names)
        if (name == text)
            return s;
    return std::nullopt;
}

Value ValueGen::draw(std::mt19937_64 &rng) const
{
    switch (kind) {
    case Kind::literal:
        return literal;
    case Kind::random_int:
        return uniform_int(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi));
    case Kind::random_real:
        return uniform_real(rng, lo, hi);
    case Kind::choice:
        return choices[uniform_index(rng, choices.size())];
    }
    return literal;
}

bool StageMatch::matches(std::size_t round_index, const std::string &stage_name) const
{
    if (round && static_cast<std::size_t>(*round) != round_index)
        return false;
    return !stage || *stage == stage_name;
}

const StageHandler *BotScript::handler_for(std::size_t round_index, const std::string &stage_name) const
{
    for (const auto &h : handlers)
        if (h.when.matches(round_index, stage_name))
            return &h;
    return nullptr;
}

BotScript parse_bot_script(std::string_view text)
{
    return parse_script_node(yaml::load(text), false);
}

std::vector<BotGroup> parse_bot_groups(std::string_view text)
{
    auto root = yaml::load(text);
    std::vector<BotGroup> groups;
    if (root.IsMap() && root["bots"]) {
        yaml::check_keys(root, {"bots"}, "bot file");
        yaml::expect_seq(root["bots"], "bots");
        for (auto item : root["bots"]) {
            BotGroup g;
            g.script = parse_script_node(item, true);
            if (item["count"])
                g.count = static_cast<std::size_t>(yaml::integer(item["count"], "count"));
            groups.push_back(std::move(g));
        }
        if (groups.empty())
            yaml::invalid(root, "bots list is empty");
    } else {
        BotGroup g;
        g.script = parse_script_node(root, true);
        if (root["count"])
            g.count = static_cast<std::size_t>(yaml::integer(root["count"], "count"));
        else
            g.count = 0;
        groups.push_back(std::move(g));
    }
    return groups;
}

} // namespace vlab
