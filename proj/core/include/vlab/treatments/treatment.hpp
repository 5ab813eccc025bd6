// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace vlab {

// Reserved factor every treatment must assign; the lobby admits this many players.
inline constexpr const char *player_count_factor = "playerCount";

struct Treatment {
    std::string name;
    // Factor name -> scalar value (integer, number, string or boolean).
    std::map<std::string, Value> assignments;

    std::int64_t player_count() const;

    bool operator==(const Treatment &) const = default;
};

Value to_value(const Treatment &treatment);
Treatment treatment_from_value(const Value &value);

} // namespace vlab
