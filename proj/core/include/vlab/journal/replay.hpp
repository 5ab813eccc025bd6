// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/journal/journal.hpp"
#include "vlab/model/engine_state.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vlab {

// Incremental fold of journal records into an EngineState. Records must arrive
// in offset order starting at 0.
class Replayer {
public:
    // Throws journal-failure on a record that does not fit the state so far.
    void apply(const EventRecord &record);

    std::uint64_t next_offset() const noexcept { return next_offset_; }
    EngineState state() const;

private:
    EngineState state_;
    std::map<std::pair<ScopeRef, std::string>, Attribute> attributes_;
    std::uint64_t next_offset_ = 0;
};

struct ReplayResult {
    EngineState state;
    // Offset one past the last applied record.
    std::uint64_t applied = 0;
    std::optional<std::string> diagnostic;
};

// Folds records with offset < up_to (all when absent); halts at the first bad one.
ReplayResult replay(const std::vector<EventRecord> &records, std::optional<std::uint64_t> up_to = std::nullopt);
// Same, carrying over a read diagnostic from a damaged journal.
ReplayResult replay(const JournalReadResult &journal, std::optional<std::uint64_t> up_to = std::nullopt);

} // namespace vlab
