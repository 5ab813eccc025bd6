// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/runtime/scheduler.hpp"

#include <deque>
#include <map>
#include <mutex>
#include <utility>

namespace vlab {

// Deterministic single-threaded scheduler with a monotone virtual clock. Time only
// moves when no task is ready, and then jumps straight to the next timer, so
// waits cost nothing and a run is fully determined by the order of posts.
class VirtualScheduler final : public Scheduler {
public:
    explicit VirtualScheduler(TimeMs start = 0) : now_(start) {}

    TimeMs now() const override;
    std::shared_ptr<Strand> make_strand(std::string name) override;
    bool is_virtual() const noexcept override { return true; }

    // Runs until `done()` holds (checked after every task), nothing is left, or the
    // next timer lies beyond `deadline`. Returns done().
    bool run_until(const std::function<bool()> &done, TimeMs deadline);
    // Runs everything due up to and including `until`, then sets the clock to it.
    void advance_to(TimeMs until);
    // Runs ready work without moving the clock.
    void run_ready();

    std::size_t pending() const;

private:
    friend class VirtualStrand;

    void post(Task task);
    TimerId post_at(TimeMs at, Task task);
    void cancel(TimerId id);
    bool step(TimeMs deadline);

    mutable std::mutex mutex_;
    TimeMs now_;
    std::uint64_t next_seq_ = 1;
    std::deque<Task> ready_;
    std::map<std::pair<TimeMs, std::uint64_t>, Task> timers_;
    std::map<TimerId, std::pair<TimeMs, std::uint64_t>> timer_index_;
};

} // namespace vlab
