// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/model/engine_state.hpp"

#include <string>
#include <vector>

namespace vlab {

// Whether `viewer` may see (scope, key). Game, round and stage scopes go to the
// active members of a started game that is the viewer's current game. Player and
// composite scopes go to their owner, and to game-mates when the key is public.
bool can_see(const EngineState &state, const PlayerId &viewer, const ScopeRef &scope, const std::string &key);

// Every player allowed to see (scope, key), in id order.
std::vector<PlayerId> audience(const EngineState &state, const ScopeRef &scope, const std::string &key);

// Game the viewer currently observes, if it has started and they are active in it.
const GameState *visible_game(const EngineState &state, const PlayerId &viewer);

} // namespace vlab
