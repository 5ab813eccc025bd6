// SPDX-License-Identifier: Apache-2.0
#include "vlab/common/value.hpp"

namespace vlab {

std::string to_text(const Value &value)
{
    // Invalid UTF-8 is replaced rather than thrown so the journal never rejects a record.
    return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

} // namespace vlab
