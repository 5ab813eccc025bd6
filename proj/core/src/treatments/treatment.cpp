// SPDX-License-Identifier: Apache-2.0
#include "vlab/treatments/treatment.hpp"

#include "vlab/common/error.hpp"

namespace vlab {

std::int64_t Treatment::player_count() const
{
    auto it = assignments.find(player_count_factor);
    if (it == assignments.end() || !it->second.is_number_integer())
        fail(Errc::validation_error, "treatment '" + name + "' has no integer playerCount");
    return it->second.get<std::int64_t>();
}

Value to_value(const Treatment &treatment)
{
    Value assignments = Value::object();
    for (auto &[factor, value] : treatment.assignments)
        assignments[factor] = value;
    return Value{{"name", treatment.name}, {"assignments", assignments}};
}

Treatment treatment_from_value(const Value &value)
{
    Treatment t;
    t.name = value.at("name").get<std::string>();
    for (auto &[factor, v] : value.at("assignments").items())
        t.assignments[factor] = v;
    return t;
}

} // namespace vlab
