// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <string>

namespace vlab {

// Structured attribute value. Object keys are kept sorted so dumps are deterministic.
using Value = nlohmann::json;

using TimeMs = std::int64_t;

inline constexpr std::size_t max_value_bytes = 256 * 1024;

// Compact JSON text; the journal and wire both use this form.
std::string to_text(const Value &value);

} // namespace vlab
