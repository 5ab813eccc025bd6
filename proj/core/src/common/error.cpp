// SPDX-License-Identifier: Apache-2.0
#include "vlab/common/error.hpp"

namespace vlab {

std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::scope_not_found: return "scope-not-found";
    case Errc::game_closed: return "game-closed";
    case Errc::game_paused: return "game-paused";
    case Errc::type_conflict: return "type-conflict";
    case Errc::value_too_large: return "value-too-large";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::parse_error: return "parse-error";
    case Errc::validation_error: return "validation-error";
    case Errc::flow_violation: return "flow-violation";
    case Errc::stale_stage: return "stale-stage";
    case Errc::auth_failed: return "auth-failed";
    case Errc::second_login: return "second-login";
    case Errc::protocol_violation: return "protocol-violation";
    case Errc::forbidden: return "forbidden";
    case Errc::not_found: return "not-found";
    case Errc::conflict: return "conflict";
    case Errc::batch_closed: return "batch-closed";
    case Errc::batch_not_terminal: return "batch-not-terminal";
    case Errc::unauthorized: return "unauthorized";
    case Errc::journal_failure: return "journal-failure";
    case Errc::io_error: return "io-error";
    }
    return "unknown";
}

Error::Error(Errc code, const std::string &message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

std::string_view Error::message() const noexcept
{
    std::string_view text = what();
    auto prefix = to_string(code_).size() + 2;
    return text.size() >= prefix ? text.substr(prefix) : text;
}

void fail(Errc code, const std::string &message)
{
    throw Error(code, message);
}

} // namespace vlab
