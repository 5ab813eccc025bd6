// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/error.hpp"
#include "vlab/common/value.hpp"
#include "vlab/treatments/treatment.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlab {

enum class FactorType { integer, number, string, boolean };

std::string_view to_string(FactorType type) noexcept;

struct FactorDef {
    std::string name;
    FactorType type = FactorType::string;
    std::vector<Value> values;

    bool allows(const Value &value) const;

    bool operator==(const FactorDef &) const = default;
};

enum class TimeoutStrategy { fail, start_anyway, extend };

std::string_view to_string(TimeoutStrategy strategy) noexcept;

struct LobbyConfig {
    std::string name;
    int timeout_s = 300;
    TimeoutStrategy strategy = TimeoutStrategy::fail;
    // Number of extra timeout windows; present iff strategy is extend.
    std::optional<int> extend_limit;

    bool operator==(const LobbyConfig &) const = default;
};

enum class AssignmentMethod { complete, simple };

std::string_view to_string(AssignmentMethod method) noexcept;

struct Quota {
    std::string treatment;
    int games = 1;

    bool operator==(const Quota &) const = default;
};

struct BatchSpec {
    std::string name;
    AssignmentMethod method = AssignmentMethod::complete;
    std::vector<Quota> quotas;
    std::string lobby;
    // Seed for simple assignment; when absent the engine picks one and journals it.
    std::optional<std::uint64_t> seed;

    bool operator==(const BatchSpec &) const = default;
};

struct Protocol {
    std::vector<FactorDef> factors;
    std::vector<Treatment> treatments;
    std::vector<LobbyConfig> lobbies;
    std::vector<BatchSpec> batches;

    const FactorDef *factor(std::string_view name) const;
    const Treatment *treatment(std::string_view name) const;
    const LobbyConfig *lobby(std::string_view name) const;
    const BatchSpec *batch(std::string_view name) const;

    bool operator==(const Protocol &) const = default;
};

// Parse or validation failure; `line` is 1-based, 0 when no position applies.
class ProtocolError : public Error {
public:
    ProtocolError(Errc code, const std::string &message, int line = 0);

    int line() const noexcept { return line_; }
    const std::string &detail() const noexcept { return detail_; }

private:
    int line_;
    std::string detail_;
};

// Throws ProtocolError (parse-error for malformed YAML, validation-error otherwise).
Protocol parse_protocol(std::string_view yaml);

// Deterministic YAML rendering; parse_protocol(serialize_protocol(p)) == p.
std::string serialize_protocol(const Protocol &protocol);

// Checks every cross-reference and value constraint; throws ProtocolError.
void validate_protocol(const Protocol &protocol);
void validate_treatment(const Protocol &protocol, const Treatment &treatment);
void validate_batch(const Protocol &protocol, const BatchSpec &batch);

Value to_value(const LobbyConfig &lobby);
LobbyConfig lobby_config_from_value(const Value &value);
Value to_value(const BatchSpec &batch);
BatchSpec batch_spec_from_value(const Value &value);

// Factor values rendered the way they appear in generated treatment names.
std::string render_scalar(const Value &value);

} // namespace vlab
