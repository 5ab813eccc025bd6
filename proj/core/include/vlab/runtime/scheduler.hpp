// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/common/value.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace vlab {

using Task = std::function<void()>;
using TimerId = std::uint64_t;

// Serial executor: tasks posted to one strand never run concurrently and run in
// the order they became due. Each game, the control plane and each bot get one.
class Strand {
public:
    virtual ~Strand() = default;

    virtual void post(Task task) = 0;
    // Runs `task` on this strand once the scheduler clock reaches `at`.
    virtual TimerId post_at(TimeMs at, Task task) = 0;
    // No effect if the timer already fired or was cancelled.
    virtual void cancel(TimerId id) = 0;

    virtual const std::string &name() const noexcept = 0;
};

class Scheduler {
public:
    virtual ~Scheduler() = default;

    // Server clock in milliseconds.
    virtual TimeMs now() const = 0;
    virtual std::shared_ptr<Strand> make_strand(std::string name) = 0;
    virtual bool is_virtual() const noexcept = 0;
};

} // namespace vlab
