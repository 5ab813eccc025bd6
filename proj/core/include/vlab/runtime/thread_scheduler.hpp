// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlab/runtime/scheduler.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace vlab {

// Wall-clock scheduler: a worker pool runs strands, a timer thread feeds due
// timers into their strands. Different strands progress in parallel.
class ThreadScheduler final : public Scheduler {
public:
    explicit ThreadScheduler(std::size_t workers = std::thread::hardware_concurrency());
    ~ThreadScheduler() override;

    ThreadScheduler(const ThreadScheduler &) = delete;
    ThreadScheduler &operator=(const ThreadScheduler &) = delete;

    TimeMs now() const override;
    std::shared_ptr<Strand> make_strand(std::string name) override;
    bool is_virtual() const noexcept override { return false; }

    // Drops pending work and joins all threads. Idempotent.
    void stop();

    // No strand has queued or running work (pending timers do not count).
    bool idle() const;

private:
    friend class ThreadStrand;
    class ThreadStrandImpl;

    void schedule(std::shared_ptr<ThreadStrandImpl> strand);
    TimerId add_timer(std::weak_ptr<ThreadStrandImpl> strand, TimeMs at, Task task);
    void cancel_timer(TimerId id);
    void worker_loop();
    void timer_loop();

    mutable std::mutex run_mutex_;
    std::condition_variable run_cv_;
    std::deque<std::shared_ptr<ThreadStrandImpl>> runnable_;

    struct TimerEntry {
        TimerId id;
        std::weak_ptr<ThreadStrandImpl> strand;
        Task task;
    };
    std::mutex timer_mutex_;
    std::condition_variable timer_cv_;
    std::multimap<std::chrono::steady_clock::time_point, TimerEntry> timers_;
    std::map<TimerId, std::multimap<std::chrono::steady_clock::time_point, TimerEntry>::iterator> timer_index_;
    TimerId next_timer_ = 1;

    std::size_t busy_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
    std::thread timer_thread_;
};

} // namespace vlab
