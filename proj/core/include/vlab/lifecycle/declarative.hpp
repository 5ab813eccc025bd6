// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"
#include "vlab/lifecycle/experiment.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vlab {

// Game structure and settings read from a YAML game file, for experiments that
// need no compiled callbacks.
struct GameDefinition {
    std::string name = "experiment";
    std::size_t intro_steps = 1;
    DisconnectPolicy disconnect;
    // One stage list per round. With `rounds_factor` set, the first list repeats
    // as many times as the treatment says.
    std::vector<std::vector<StageSpec>> rounds;
    std::optional<std::string> rounds_factor;
    std::vector<std::string> public_keys;
    std::map<std::string, Value> game_init;
    std::map<std::string, Value> player_init;
};

// Throws ProtocolError with the offending line.
GameDefinition parse_game_definition(std::string_view yaml);

Experiment make_experiment(const GameDefinition &definition);

} // namespace vlab
