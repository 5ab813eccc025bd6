// SPDX-License-Identifier: Apache-2.0
#include "yaml_util.hpp"

#include <algorithm>
#include <charconv>

namespace vlab::yaml {

int line_of(const YAML::Node &node)
{
    auto mark = node.Mark();
    return mark.line >= 0 ? mark.line + 1 : 0;
}

void invalid(const YAML::Node &node, const std::string &message)
{
    throw ProtocolError(Errc::validation_error, message, node ? line_of(node) : 0);
}

YAML::Node load(std::string_view text)
{
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::Exception &e) {
        throw ProtocolError(Errc::parse_error, e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
    }
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

std::string text(const YAML::Node &node, const std::string &what)
{
    if (!node.IsScalar())
        invalid(node, what + " must be a scalar");
    return node.Scalar();
}

int integer(const YAML::Node &node, const std::string &what)
{
    auto s = text(node, what);
    int v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size())
        invalid(node, what + " must be an integer ('" + s + "')");
    return v;
}

double number(const YAML::Node &node, const std::string &what)
{
    text(node, what);
    try {
        return node.as<double>();
    } catch (const YAML::Exception &) {
        invalid(node, what + " must be a number ('" + node.Scalar() + "')");
    }
}

bool boolean(const YAML::Node &node, const std::string &what)
{
    text(node, what);
    try {
        return node.as<bool>();
    } catch (const YAML::Exception &) {
        invalid(node, what + " must be true or false ('" + node.Scalar() + "')");
    }
}

Value to_value(const YAML::Node &node)
{
    switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
        return nullptr;
    case YAML::NodeType::Sequence: {
        Value out = Value::array();
        for (auto item : node)
            out.push_back(to_value(item));
        return out;
    }
    case YAML::NodeType::Map: {
        Value out = Value::object();
        for (auto it = node.begin(); it != node.end(); ++it)
            out[it->first.as<std::string>()] = to_value(it->second);
        return out;
    }
    case YAML::NodeType::Scalar:
        break;
    }
    const auto &s = node.Scalar();
    if (node.Tag() == "!")
        return s;
    if (s == "null" || s == "~")
        return nullptr;
    if (s == "true" || s == "false")
        return s == "true";
    std::int64_t i = 0;
    if (auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
        ec == std::errc() && end == s.data() + s.size())
        return i;
    double d = 0;
    if (auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
        ec == std::errc() && end == s.data() + s.size() && !s.empty())
        return d;
    return s;
}

} // namespace vlab::yaml
