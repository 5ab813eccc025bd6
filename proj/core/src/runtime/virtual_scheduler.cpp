// SPDX-License-Identifier: Apache-2.0
#include "vlab/runtime/virtual_scheduler.hpp"

namespace vlab {

class VirtualStrand final : public Strand {
public:
    VirtualStrand(VirtualScheduler &scheduler, std::string name) : scheduler_(scheduler), name_(std::move(name)) {}

    void post(Task task) override { scheduler_.post(std::move(task)); }
    TimerId post_at(TimeMs at, Task task) override { return scheduler_.post_at(at, std::move(task)); }
    void cancel(TimerId id) override { scheduler_.cancel(id); }
    const std::string &name() const noexcept override { return name_; }

private:
    VirtualScheduler &scheduler_;
    std::string name_;
};

TimeMs VirtualScheduler::now() const
{
    std::lock_guard lock(mutex_);
    return now_;
}

std::shared_ptr<Strand> VirtualScheduler::make_strand(std::string name)
{
    return std::make_shared<VirtualStrand>(*this, std::move(name));
}

void VirtualScheduler::post(Task task)
{
    std::lock_guard lock(mutex_);
    ready_.push_back(std::move(task));
}

TimerId VirtualScheduler::post_at(TimeMs at, Task task)
{
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(std::max(at, now_), next_seq_++);
    timers_.emplace(key, std::move(task));
    TimerId id = key.second;
    timer_index_.emplace(id, key);
    return id;
}

void VirtualScheduler::cancel(TimerId id)
{
    std::lock_guard lock(mutex_);
    auto it = timer_index_.find(id);
    if (it == timer_index_.end())
        return;
    timers_.erase(it->second);
    timer_index_.erase(it);
}

bool VirtualScheduler::step(TimeMs deadline)
{
    Task task;
    {
        std::lock_guard lock(mutex_);
        if (ready_.empty()) {
            if (timers_.empty() || timers_.begin()->first.first > deadline)
                return false;
            auto due = timers_.begin()->first.first;
            now_ = due;
            while (!timers_.empty() && timers_.begin()->first.first == due) {
                timer_index_.erase(timers_.begin()->first.second);
                ready_.push_back(std::move(timers_.begin()->second));
                timers_.erase(timers_.begin());
            }
        }
        task = std::move(ready_.front());
        ready_.pop_front();
    }
    task();
    return true;
}

bool VirtualScheduler::run_until(const std::function<bool()> &done, TimeMs deadline)
{
    if (done())
        return true;
    while (step(deadline))
        if (done())
            return true;
    return done();
}

void VirtualScheduler::advance_to(TimeMs until)
{
    while (step(until)) {
    }
    std::lock_guard lock(mutex_);
    if (now_ < until)
        now_ = until;
}

void VirtualScheduler::run_ready()
{
    TimeMs current = now();
    while (step(current)) {
    }
}

std::size_t VirtualScheduler::pending() const
{
    std::lock_guard lock(mutex_);
    return ready_.size() + timers_.size();
}

} // namespace vlab
