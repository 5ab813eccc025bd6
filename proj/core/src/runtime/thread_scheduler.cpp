// SPDX-License-Identifier: Apache-2.0
#include "vlab/runtime/thread_scheduler.hpp"

#include <exception>
#include <iostream>

namespace vlab {

class ThreadScheduler::ThreadStrandImpl final : public Strand,
                                                public std::enable_shared_from_this<ThreadStrandImpl> {
public:
    ThreadStrandImpl(ThreadScheduler &scheduler, std::string name) : scheduler_(scheduler), name_(std::move(name)) {}

    void post(Task task) override
    {
        bool wake = false;
        {
            std::lock_guard lock(mutex_);
            queue_.push_back(std::move(task));
            if (!scheduled_) {
                scheduled_ = true;
                wake = true;
            }
        }
        if (wake)
            scheduler_.schedule(shared_from_this());
    }

    TimerId post_at(TimeMs at, Task task) override
    {
        return scheduler_.add_timer(weak_from_this(), at, std::move(task));
    }

    void cancel(TimerId id) override { scheduler_.cancel_timer(id); }

    const std::string &name() const noexcept override { return name_; }

    // Runs a bounded batch; returns true if more work remains.
    bool run_batch()
    {
        for (int i = 0; i < 64; ++i) {
            Task task;
            {
                std::lock_guard lock(mutex_);
                if (queue_.empty()) {
                    scheduled_ = false;
                    return false;
                }
                task = std::move(queue_.front());
                queue_.pop_front();
            }
            try {
                task();
            } catch (const std::exception &e) {
                std::cerr << "vlab: task on strand " << name_ << " failed: " << e.what() << '\n';
            }
        }
        std::lock_guard lock(mutex_);
        if (queue_.empty()) {
            scheduled_ = false;
            return false;
        }
        return true;
    }

private:
    ThreadScheduler &scheduler_;
    std::string name_;
    std::mutex mutex_;
    std::deque<Task> queue_;
    bool scheduled_ = false;
};

ThreadScheduler::ThreadScheduler(std::size_t workers)
{
    if (workers == 0)
        workers = 1;
    for (std::size_t i = 0; i < workers; ++i)
        workers_.emplace_back([this] { worker_loop(); });
    timer_thread_ = std::thread([this] { timer_loop(); });
}

ThreadScheduler::~ThreadScheduler()
{
    stop();
}

void ThreadScheduler::stop()
{
    {
        std::lock_guard lock(run_mutex_);
        std::lock_guard timer_lock(timer_mutex_);
        if (stopping_)
            return;
        stopping_ = true;
    }
    run_cv_.notify_all();
    timer_cv_.notify_all();
    for (auto &t : workers_)
        if (t.joinable())
            t.join();
    if (timer_thread_.joinable())
        timer_thread_.join();
    std::lock_guard lock(run_mutex_);
    runnable_.clear();
    std::lock_guard timer_lock(timer_mutex_);
    timers_.clear();
    timer_index_.clear();
}

TimeMs ThreadScheduler::now() const
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::shared_ptr<Strand> ThreadScheduler::make_strand(std::string name)
{
    return std::make_shared<ThreadStrandImpl>(*this, std::move(name));
}

bool ThreadScheduler::idle() const
{
    std::lock_guard lock(run_mutex_);
    return runnable_.empty() && busy_ == 0;
}

void ThreadScheduler::schedule(std::shared_ptr<ThreadStrandImpl> strand)
{
    {
        std::lock_guard lock(run_mutex_);
        if (stopping_)
            return;
        runnable_.push_back(std::move(strand));
    }
    run_cv_.notify_one();
}

TimerId ThreadScheduler::add_timer(std::weak_ptr<ThreadStrandImpl> strand, TimeMs at, Task task)
{
    auto delay = std::chrono::milliseconds(std::max<TimeMs>(0, at - now()));
    auto due = std::chrono::steady_clock::now() + delay;
    TimerId id;
    {
        std::lock_guard lock(timer_mutex_);
        id = next_timer_++;
        auto it = timers_.emplace(due, TimerEntry{id, std::move(strand), std::move(task)});
        timer_index_.emplace(id, it);
    }
    timer_cv_.notify_one();
    return id;
}

void ThreadScheduler::cancel_timer(TimerId id)
{
    std::lock_guard lock(timer_mutex_);
    auto it = timer_index_.find(id);
    if (it == timer_index_.end())
        return;
    timers_.erase(it->second);
    timer_index_.erase(it);
}

void ThreadScheduler::worker_loop()
{
    while (true) {
        std::shared_ptr<ThreadStrandImpl> strand;
        {
            std::unique_lock lock(run_mutex_);
            run_cv_.wait(lock, [&] { return stopping_ || !runnable_.empty(); });
            if (stopping_)
                return;
            strand = std::move(runnable_.front());
            runnable_.pop_front();
            ++busy_;
        }
        bool more = strand->run_batch();
        if (more)
            schedule(strand);
        std::lock_guard lock(run_mutex_);
        --busy_;
    }
}

void ThreadScheduler::timer_loop()
{
    std::unique_lock lock(timer_mutex_);
    while (!stopping_) {
        if (timers_.empty()) {
            timer_cv_.wait(lock);
            continue;
        }
        auto due = timers_.begin()->first;
        if (std::chrono::steady_clock::now() < due) {
            timer_cv_.wait_until(lock, due);
            continue;
        }
        auto entry = std::move(timers_.begin()->second);
        timer_index_.erase(entry.id);
        timers_.erase(timers_.begin());
        lock.unlock();
        if (auto strand = entry.strand.lock())
            strand->post(std::move(entry.task));
        lock.lock();
    }
}

} // namespace vlab
