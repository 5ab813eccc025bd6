// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/treatments/protocol.hpp"

#include <map>
#include <string>
#include <vector>

namespace vlab {

// Full cross product of every factor not pinned in `fixed`. Factors vary in name
// order (first name most significant), values in declared order. Each treatment
// is named by its "factor=value" pairs, sorted by factor and joined with ';'.
std::vector<Treatment> expand_factorial(const std::vector<FactorDef> &factors,
                                        const std::map<std::string, Value> &fixed = {});

} // namespace vlab
