// SPDX-License-Identifier: Apache-2.0
#include "vlab/treatments/factorial.hpp"

#include <algorithm>

namespace vlab {

std::vector<Treatment> expand_factorial(const std::vector<FactorDef> &factors, const std::map<std::string, Value> &fixed)
{
    if (factors.empty())
        throw ProtocolError(Errc::validation_error, "factorial expansion needs at least one factor");
    for (auto &f : factors)
        if (f.values.empty())
            throw ProtocolError(Errc::validation_error, "factor '" + f.name + "' has no allowed values");
    for (auto &[name, value] : fixed) {
        auto it = std::find_if(factors.begin(), factors.end(), [&](auto &f) { return f.name == name; });
        if (it == factors.end())
            throw ProtocolError(Errc::validation_error, "fixed value for undeclared factor '" + name + "'");
        if (!it->allows(value))
            throw ProtocolError(Errc::validation_error,
                                "fixed value " + render_scalar(value) + " is not allowed for factor '" + name + "'");
    }

    std::vector<const FactorDef *> free;
    for (auto &f : factors)
        if (!fixed.contains(f.name))
            free.push_back(&f);
    std::sort(free.begin(), free.end(), [](auto *a, auto *b) { return a->name < b->name; });

    std::vector<Treatment> out;
    std::vector<std::size_t> digits(free.size(), 0);
    while (true) {
        Treatment t;
        t.assignments = fixed;
        for (std::size_t i = 0; i < free.size(); ++i)
            t.assignments[free[i]->name] = free[i]->values[digits[i]];
        for (auto &[name, value] : t.assignments) {
            if (!t.name.empty())
                t.name += ';';
            t.name += name + "=" + render_scalar(value);
        }
        out.push_back(std::move(t));

        // Odometer: the last (alphabetically greatest) factor turns fastest.
        std::size_t i = free.size();
        while (i > 0) {
            --i;
            if (++digits[i] < free[i]->values.size())
                break;
            digits[i] = 0;
            if (i == 0)
                return out;
        }
        if (free.empty())
            return out;
    }
}

} // namespace vlab
