// SPDX-License-Identifier: Apache-2.0
#include "vlab/treatments/protocol.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <initializer_list>
#include <set>

namespace vlab {

namespace {

int line_of(const YAML::Node &node)
{
    auto mark = node.Mark();
    return mark.line >= 0 ? mark.line + 1 : 0;
}

[[noreturn]] void invalid(const YAML::Node &node, const std::string &message)
{
    throw ProtocolError(Errc::validation_error, message, node ? line_of(node) : 0);
}

[[noreturn]] void invalid(const std::string &message)
{
    throw ProtocolError(Errc::validation_error, message, 0);
}

void expect_map(const YAML::Node &node, const std::string &what)
{
    if (!node.IsMap())
        invalid(node, what + " must be a mapping");
}

void expect_seq(const YAML::Node &node, const std::string &what)
{
    if (!node.IsSequence())
        invalid(node, what + " must be a list");
}

void check_keys(const YAML::Node &node, std::initializer_list<std::string_view> allowed, const std::string &context)
{
    for (auto it = node.begin(); it != node.end(); ++it) {
        auto key = it->first.as<std::string>();
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            invalid(it->first, "unknown key '" + key + "' in " + context);
    }
}

const YAML::Node required(const YAML::Node &node, const char *key, const std::string &context)
{
    auto child = node[key];
    if (!child)
        invalid(node, context + " is missing '" + key + "'");
    return child;
}

std::string scalar(const YAML::Node &node, const std::string &what)
{
    if (!node.IsScalar())
        invalid(node, what + " must be a scalar");
    return node.Scalar();
}

template <typename T>
T convert(const YAML::Node &node, const std::string &what)
{
    if (!node.IsScalar())
        invalid(node, what + " must be a scalar");
    try {
        return node.as<T>();
    } catch (const YAML::Exception &) {
        invalid(node, what + " has the wrong type ('" + node.Scalar() + "')");
    }
}

std::optional<FactorType> parse_factor_type(std::string_view text)
{
    for (auto t : {FactorType::integer, FactorType::number, FactorType::string, FactorType::boolean})
        if (to_string(t) == text)
            return t;
    return std::nullopt;
}

Value typed_value(const YAML::Node &node, FactorType type, const std::string &what)
{
    switch (type) {
    case FactorType::integer: return convert<std::int64_t>(node, what);
    case FactorType::number: {
        auto v = convert<double>(node, what);
        if (!std::isfinite(v))
            invalid(node, what + " must be finite");
        return v;
    }
    case FactorType::boolean: return convert<bool>(node, what);
    case FactorType::string: return scalar(node, what);
    }
    return nullptr;
}

std::string format_double(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string out(buf, end);
    // Keep a decimal point so the value reads as a float.
    if (out.find_first_of(".eEn") == std::string::npos)
        out += ".0";
    return out;
}

FactorDef parse_factor(const YAML::Node &node)
{
    expect_map(node, "factor");
    check_keys(node, {"name", "type", "values"}, "factor");
    FactorDef factor;
    factor.name = scalar(required(node, "name", "factor"), "factor name");
    if (factor.name.empty())
        invalid(node, "factor name must be non-empty");
    auto type_node = required(node, "type", "factor '" + factor.name + "'");
    auto type = parse_factor_type(scalar(type_node, "factor type"));
    if (!type)
        invalid(type_node, "factor '" + factor.name + "' has unknown type '" + type_node.Scalar() + "'");
    factor.type = *type;
    auto values = required(node, "values", "factor '" + factor.name + "'");
    expect_seq(values, "factor values");
    for (auto v : values)
        factor.values.push_back(typed_value(v, factor.type, "value of factor '" + factor.name + "'"));
    if (factor.values.empty())
        invalid(values, "factor '" + factor.name + "' has no allowed values");
    return factor;
}

Treatment parse_treatment(const YAML::Node &node, const std::vector<FactorDef> &factors)
{
    expect_map(node, "treatment");
    check_keys(node, {"name", "assignments"}, "treatment");
    Treatment t;
    t.name = scalar(required(node, "name", "treatment"), "treatment name");
    auto assignments = required(node, "assignments", "treatment '" + t.name + "'");
    expect_map(assignments, "treatment assignments");
    for (auto it = assignments.begin(); it != assignments.end(); ++it) {
        auto name = it->first.as<std::string>();
        auto factor = std::find_if(factors.begin(), factors.end(), [&](auto &f) { return f.name == name; });
        if (factor == factors.end())
            invalid(it->first, "treatment '" + t.name + "' references undeclared factor '" + name + "'");
        auto value = typed_value(it->second, factor->type, "factor '" + name + "' in treatment '" + t.name + "'");
        if (!factor->allows(value))
            invalid(it->second, "treatment '" + t.name + "' sets factor '" + name + "' to " + render_scalar(value) +
                                    ", outside its allowed values");
        t.assignments[name] = value;
    }
    return t;
}

LobbyConfig parse_lobby(const YAML::Node &node)
{
    expect_map(node, "lobby");
    check_keys(node, {"name", "timeout", "strategy", "extend_limit"}, "lobby");
    LobbyConfig lobby;
    lobby.name = scalar(required(node, "name", "lobby"), "lobby name");
    lobby.timeout_s = convert<int>(required(node, "timeout", "lobby '" + lobby.name + "'"), "lobby timeout");
    if (auto s = node["strategy"]) {
        auto text = scalar(s, "lobby strategy");
        if (text == "fail")
            lobby.strategy = TimeoutStrategy::fail;
        else if (text == "start_anyway")
            lobby.strategy = TimeoutStrategy::start_anyway;
        else if (text == "extend")
            lobby.strategy = TimeoutStrategy::extend;
        else
            invalid(s, "lobby '" + lobby.name + "' has unknown strategy '" + text + "'");
    }
    if (auto e = node["extend_limit"])
        lobby.extend_limit = convert<int>(e, "lobby extend_limit");
    return lobby;
}

BatchSpec parse_batch(const YAML::Node &node)
{
    expect_map(node, "batch");
    check_keys(node, {"name", "assignment", "quotas", "lobby", "seed"}, "batch");
    BatchSpec batch;
    if (auto n = node["name"])
        batch.name = scalar(n, "batch name");
    if (auto a = node["assignment"]) {
        auto text = scalar(a, "batch assignment");
        if (text == "complete")
            batch.method = AssignmentMethod::complete;
        else if (text == "simple")
            batch.method = AssignmentMethod::simple;
        else
            invalid(a, "unknown assignment method '" + text + "'");
    }
    auto quotas = required(node, "quotas", "batch '" + batch.name + "'");
    expect_seq(quotas, "batch quotas");
    for (auto q : quotas) {
        expect_map(q, "quota");
        check_keys(q, {"treatment", "games"}, "quota");
        Quota quota;
        quota.treatment = scalar(required(q, "treatment", "quota"), "quota treatment");
        if (auto g = q["games"])
            quota.games = convert<int>(g, "quota games");
        batch.quotas.push_back(quota);
    }
    if (auto l = node["lobby"])
        batch.lobby = scalar(l, "batch lobby");
    if (auto s = node["seed"])
        batch.seed = convert<std::uint64_t>(s, "batch seed");
    return batch;
}

void emit_scalar(YAML::Emitter &out, const Value &value)
{
    if (value.is_boolean())
        out << (value.get<bool>() ? "true" : "false");
    else if (value.is_number_integer())
        out << value.get<std::int64_t>();
    else if (value.is_number())
        out << format_double(value.get<double>());
    else
        out << value.get<std::string>();
}

} // namespace

std::string_view to_string(FactorType type) noexcept
{
    switch (type) {
    case FactorType::integer: return "integer";
    case FactorType::number: return "number";
    case FactorType::string: return "string";
    case FactorType::boolean: return "boolean";
    }
    return "unknown";
}

std::string_view to_string(TimeoutStrategy strategy) noexcept
{
    switch (strategy) {
    case TimeoutStrategy::fail: return "fail";
    case TimeoutStrategy::start_anyway: return "start_anyway";
    case TimeoutStrategy::extend: return "extend";
    }
    return "unknown";
}

std::string_view to_string(AssignmentMethod method) noexcept
{
    return method == AssignmentMethod::complete ? "complete" : "simple";
}

bool FactorDef::allows(const Value &value) const
{
    return std::find(values.begin(), values.end(), value) != values.end();
}

const FactorDef *Protocol::factor(std::string_view name) const
{
    auto it = std::find_if(factors.begin(), factors.end(), [&](auto &f) { return f.name == name; });
    return it == factors.end() ? nullptr : &*it;
}

const Treatment *Protocol::treatment(std::string_view name) const
{
    auto it = std::find_if(treatments.begin(), treatments.end(), [&](auto &t) { return t.name == name; });
    return it == treatments.end() ? nullptr : &*it;
}

const LobbyConfig *Protocol::lobby(std::string_view name) const
{
    auto it = std::find_if(lobbies.begin(), lobbies.end(), [&](auto &l) { return l.name == name; });
    return it == lobbies.end() ? nullptr : &*it;
}

const BatchSpec *Protocol::batch(std::string_view name) const
{
    auto it = std::find_if(batches.begin(), batches.end(), [&](auto &b) { return b.name == name; });
    return it == batches.end() ? nullptr : &*it;
}

ProtocolError::ProtocolError(Errc code, const std::string &message, int line)
    : Error(code, line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line), detail_(message)
{
}

std::string render_scalar(const Value &value)
{
    if (value.is_string())
        return value.get<std::string>();
    if (value.is_number_float())
        return format_double(value.get<double>());
    return value.dump();
}

Protocol parse_protocol(std::string_view yaml)
{
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml));
    } catch (const YAML::ParserException &e) {
        throw ProtocolError(Errc::parse_error, e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
    }
    if (!root || root.IsNull())
        invalid("protocol document is empty");
    expect_map(root, "protocol");
    check_keys(root, {"factors", "treatments", "lobbies", "batches"}, "protocol");

    Protocol protocol;
    auto factors = required(root, "factors", "protocol");
    expect_seq(factors, "factors");
    std::set<std::string> seen;
    for (auto f : factors) {
        auto factor = parse_factor(f);
        if (!seen.insert(factor.name).second)
            invalid(f, "duplicate factor '" + factor.name + "'");
        protocol.factors.push_back(std::move(factor));
    }

    auto treatments = required(root, "treatments", "protocol");
    expect_seq(treatments, "treatments");
    for (auto t : treatments) {
        auto treatment = parse_treatment(t, protocol.factors);
        try {
            validate_treatment(protocol, treatment);
        } catch (const ProtocolError &e) {
            if (e.line() == 0)
                throw ProtocolError(e.code(), e.detail(), line_of(t));
            throw;
        }
        protocol.treatments.push_back(std::move(treatment));
    }

    if (auto lobbies = root["lobbies"]) {
        expect_seq(lobbies, "lobbies");
        for (auto l : lobbies)
            protocol.lobbies.push_back(parse_lobby(l));
    }
    if (auto batches = root["batches"]) {
        expect_seq(batches, "batches");
        for (auto b : batches)
            protocol.batches.push_back(parse_batch(b));
    }

    validate_protocol(protocol);
    return protocol;
}

void validate_treatment(const Protocol &protocol, const Treatment &treatment)
{
    if (treatment.name.empty())
        invalid("treatment name must be non-empty");
    for (auto &[name, value] : treatment.assignments) {
        auto factor = protocol.factor(name);
        if (!factor)
            invalid("treatment '" + treatment.name + "' references undeclared factor '" + name + "'");
        if (!factor->allows(value))
            invalid("treatment '" + treatment.name + "' sets factor '" + name + "' to " + render_scalar(value) +
                    ", outside its allowed values");
    }
    auto pc = treatment.assignments.find(player_count_factor);
    if (pc == treatment.assignments.end())
        invalid("treatment '" + treatment.name + "' must assign playerCount");
    if (!pc->second.is_number_integer() || pc->second.get<std::int64_t>() < 1)
        invalid("treatment '" + treatment.name + "' playerCount must be a positive integer");
}

void validate_batch(const Protocol &protocol, const BatchSpec &batch)
{
    if (batch.quotas.empty())
        invalid("batch '" + batch.name + "' has no quotas");
    for (auto &q : batch.quotas) {
        if (!protocol.treatment(q.treatment))
            invalid("batch '" + batch.name + "' references unknown treatment '" + q.treatment + "'");
        if (q.games < 1)
            invalid("batch '" + batch.name + "' quota for '" + q.treatment + "' must be at least 1 game");
    }
    if (!protocol.lobby(batch.lobby))
        invalid("batch '" + batch.name + "' references unknown lobby '" + batch.lobby + "'");
}

void validate_protocol(const Protocol &protocol)
{
    std::set<std::string> names;
    for (auto &f : protocol.factors) {
        if (!names.insert(f.name).second)
            invalid("duplicate factor '" + f.name + "'");
        if (f.values.empty())
            invalid("factor '" + f.name + "' has no allowed values");
        for (std::size_t i = 0; i < f.values.size(); ++i)
            for (std::size_t j = i + 1; j < f.values.size(); ++j)
                if (f.values[i] == f.values[j])
                    invalid("factor '" + f.name + "' lists " + render_scalar(f.values[i]) + " twice");
    }
    if (!protocol.factor(player_count_factor))
        invalid("protocol must declare the playerCount factor");
    if (protocol.factor(player_count_factor)->type != FactorType::integer)
        invalid("playerCount must be an integer factor");

    if (protocol.treatments.empty())
        invalid("protocol must list at least one treatment");
    names.clear();
    for (auto &t : protocol.treatments) {
        if (!names.insert(t.name).second)
            invalid("duplicate treatment '" + t.name + "'");
        validate_treatment(protocol, t);
    }

    names.clear();
    for (auto &l : protocol.lobbies) {
        if (!names.insert(l.name).second)
            invalid("duplicate lobby '" + l.name + "'");
        if (l.timeout_s < 1)
            invalid("lobby '" + l.name + "' timeout must be a positive number of seconds");
        if ((l.strategy == TimeoutStrategy::extend) != l.extend_limit.has_value())
            invalid("lobby '" + l.name + "': extend_limit is required with, and only with, strategy extend");
        if (l.extend_limit && *l.extend_limit < 0)
            invalid("lobby '" + l.name + "' extend_limit must be non-negative");
    }

    names.clear();
    for (auto &b : protocol.batches) {
        if (!names.insert(b.name).second)
            invalid("duplicate batch '" + b.name + "'");
        validate_batch(protocol, b);
    }
}

std::string serialize_protocol(const Protocol &protocol)
{
    YAML::Emitter out;
    out << YAML::BeginMap;

    out << YAML::Key << "factors" << YAML::Value << YAML::BeginSeq;
    for (auto &f : protocol.factors) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << f.name;
        out << YAML::Key << "type" << YAML::Value << std::string(to_string(f.type));
        out << YAML::Key << "values" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (auto &v : f.values)
            emit_scalar(out, v);
        out << YAML::EndSeq;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "treatments" << YAML::Value << YAML::BeginSeq;
    for (auto &t : protocol.treatments) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << t.name;
        out << YAML::Key << "assignments" << YAML::Value << YAML::BeginMap;
        // Declaration order reads better than alphabetical.
        for (auto &f : protocol.factors) {
            auto it = t.assignments.find(f.name);
            if (it == t.assignments.end())
                continue;
            out << YAML::Key << f.name << YAML::Value;
            emit_scalar(out, it->second);
        }
        out << YAML::EndMap;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    if (!protocol.lobbies.empty()) {
        out << YAML::Key << "lobbies" << YAML::Value << YAML::BeginSeq;
        for (auto &l : protocol.lobbies) {
            out << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << l.name;
            out << YAML::Key << "timeout" << YAML::Value << l.timeout_s;
            out << YAML::Key << "strategy" << YAML::Value << std::string(to_string(l.strategy));
            if (l.extend_limit)
                out << YAML::Key << "extend_limit" << YAML::Value << *l.extend_limit;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }

    if (!protocol.batches.empty()) {
        out << YAML::Key << "batches" << YAML::Value << YAML::BeginSeq;
        for (auto &b : protocol.batches) {
            out << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << b.name;
            out << YAML::Key << "assignment" << YAML::Value << std::string(to_string(b.method));
            out << YAML::Key << "quotas" << YAML::Value << YAML::BeginSeq;
            for (auto &q : b.quotas)
                out << YAML::Flow << YAML::BeginMap << YAML::Key << "treatment" << YAML::Value << q.treatment
                    << YAML::Key << "games" << YAML::Value << q.games << YAML::EndMap;
            out << YAML::EndSeq;
            out << YAML::Key << "lobby" << YAML::Value << b.lobby;
            if (b.seed)
                out << YAML::Key << "seed" << YAML::Value << *b.seed;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

Value to_value(const LobbyConfig &lobby)
{
    Value out{
        {"name", lobby.name},
        {"timeout", lobby.timeout_s},
        {"strategy", to_string(lobby.strategy)},
    };
    if (lobby.extend_limit)
        out["extend_limit"] = *lobby.extend_limit;
    return out;
}

LobbyConfig lobby_config_from_value(const Value &value)
{
    LobbyConfig lobby;
    lobby.name = value.at("name").get<std::string>();
    lobby.timeout_s = value.at("timeout").get<int>();
    auto strategy = value.at("strategy").get<std::string>();
    if (strategy == "fail")
        lobby.strategy = TimeoutStrategy::fail;
    else if (strategy == "start_anyway")
        lobby.strategy = TimeoutStrategy::start_anyway;
    else if (strategy == "extend")
        lobby.strategy = TimeoutStrategy::extend;
    else
        fail(Errc::validation_error, "unknown timeout strategy '" + strategy + "'");
    if (value.contains("extend_limit"))
        lobby.extend_limit = value["extend_limit"].get<int>();
    return lobby;
}

Value to_value(const BatchSpec &batch)
{
    Value quotas = Value::array();
    for (auto &q : batch.quotas)
        quotas.push_back(Value{{"treatment", q.treatment}, {"games", q.games}});
    Value out{
        {"name", batch.name},
        {"assignment", to_string(batch.method)},
        {"quotas", quotas},
        {"lobby", batch.lobby},
    };
    if (batch.seed)
        out["seed"] = *batch.seed;
    return out;
}

BatchSpec batch_spec_from_value(const Value &value)
{
    if (!value.is_object())
        fail(Errc::validation_error, "batch spec must be an object");
    BatchSpec batch;
    batch.name = value.value("name", std::string());
    auto method = value.value("assignment", std::string("complete"));
    if (method == "complete")
        batch.method = AssignmentMethod::complete;
    else if (method == "simple")
        batch.method = AssignmentMethod::simple;
    else
        fail(Errc::validation_error, "unknown assignment method '" + method + "'");
    if (!value.contains("quotas") || !value["quotas"].is_array())
        fail(Errc::validation_error, "batch spec needs a quotas list");
    for (auto &q : value["quotas"]) {
        if (!q.is_object() || !q.contains("treatment") || !q["treatment"].is_string())
            fail(Errc::validation_error, "quota needs a treatment name");
        batch.quotas.push_back(Quota{q["treatment"].get<std::string>(), q.value("games", 1)});
    }
    batch.lobby = value.value("lobby", std::string());
    if (value.contains("seed") && value["seed"].is_number_unsigned())
        batch.seed = value["seed"].get<std::uint64_t>();
    return batch;
}

} // namespace vlab
