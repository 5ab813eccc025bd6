// SPDX-License-Identifier: Apache-2.0
#include "vlab/common/ids.hpp"

namespace vlab {

RoundId make_round_id(const GameId &game, std::size_t round_index)
{
    return RoundId(game.str() + ".r" + std::to_string(round_index));
}

StageId make_stage_id(const GameId &game, std::size_t round_index, std::size_t stage_index)
{
    return StageId(game.str() + ".r" + std::to_string(round_index) + ".s" + std::to_string(stage_index));
}

GameId game_of(const std::string &entity_id)
{
    return GameId(entity_id.substr(0, entity_id.find('.')));
}

} // namespace vlab
