// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace vlab {

enum class EventKind {
    attr_change,
    log_entry,
    hook_fired,
    flow_transition,
    lobby_event,
    connection_event,
    admin_action,
    game_event,
};

std::string_view to_string(EventKind kind) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view text) noexcept;

struct EventRecord {
    std::uint64_t offset = 0;
    TimeMs at = 0;
    EventKind kind = EventKind::attr_change;
    Value body;

    bool operator==(const EventRecord &) const = default;
};

Value to_value(const EventRecord &record);
EventRecord record_from_value(const Value &value);

// Write-ahead sink. `apply` runs after the record is durable and before any other
// record can be appended, so state mutated inside it is consistent with the offset.
class CommitLog {
public:
    virtual ~CommitLog() = default;
    virtual std::uint64_t commit(EventKind kind, Value body, TimeMs at, const std::function<void()> &apply) = 0;
};

} // namespace vlab
