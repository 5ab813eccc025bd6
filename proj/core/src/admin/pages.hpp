// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

namespace vlab {

// Fallback pages served when no static asset directory is configured.
std::string_view admin_page();
std::string_view play_page();

} // namespace vlab
