// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlab {

enum class Errc {
    scope_not_found,
    game_closed,
    game_paused,
    type_conflict,
    value_too_large,
    invalid_argument,
    parse_error,
    validation_error,
    flow_violation,
    stale_stage,
    auth_failed,
    second_login,
    protocol_violation,
    forbidden,
    not_found,
    conflict,
    batch_closed,
    batch_not_terminal,
    unauthorized,
    journal_failure,
    io_error,
};

// Stable kebab-case code used on the wire, in CLI diagnostics and in the journal.
std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string &message);

    Errc code() const noexcept { return code_; }
    // what() without the leading "<code>: ".
    std::string_view message() const noexcept;

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string &message);

} // namespace vlab
