// SPDX-License-Identifier: Apache-2.0
#include "vlab/journal/record.hpp"

#include "vlab/common/error.hpp"

#include <array>

namespace vlab {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 8> kind_names{{
    {EventKind::attr_change, "attr_change"},
    {EventKind::log_entry, "log_entry"},
    {EventKind::hook_fired, "hook_fired"},
    {EventKind::flow_transition, "flow_transition"},
    {EventKind::lobby_event, "lobby_event"},
    {EventKind::connection_event, "connection_event"},
    {EventKind::admin_action, "admin_action"},
    {EventKind::game_event, "game_event"},
}};

} // namespace

std::string_view to_string(EventKind kind) noexcept
{
    for (auto &[k, name] : kind_names)
        if (k == kind)
            return name;
    return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view text) noexcept
{
    for (auto &[k, name] : kind_names)
        if (name == text)
            return k;
    return std::nullopt;
}

Value to_value(const EventRecord &record)
{
    return Value{{"offset", record.offset}, {"at", record.at}, {"kind", to_string(record.kind)}, {"body", record.body}};
}

EventRecord record_from_value(const Value &value)
{
    EventRecord record;
    record.offset = value.at("offset").get<std::uint64_t>();
    record.at = value.at("at").get<TimeMs>();
    auto kind = parse_event_kind(value.at("kind").get<std::string>());
    if (!kind)
        fail(Errc::parse_error, "unknown event kind " + value.at("kind").dump());
    record.kind = *kind;
    record.body = value.at("body");
    return record;
}

} // namespace vlab
