// SPDX-License-Identifier: Apache-2.0
#include "vlab/sync/latency.hpp"

#include <algorithm>
#include <cmath>

namespace vlab {

std::int64_t nearest_rank(std::vector<std::int64_t> samples, double p)
{
    if (samples.empty())
        return 0;
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
    rank = std::clamp<std::size_t>(rank, 1, samples.size());
    std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(rank - 1), samples.end());
    return samples[rank - 1];
}

void LatencyRecorder::record(std::int64_t ns)
{
    std::lock_guard lock(mutex_);
    samples_.push_back(ns);
}

std::size_t LatencyRecorder::count() const
{
    std::lock_guard lock(mutex_);
    return samples_.size();
}

std::int64_t LatencyRecorder::percentile(double p) const
{
    std::vector<std::int64_t> copy;
    {
        std::lock_guard lock(mutex_);
        copy = samples_;
    }
    return nearest_rank(std::move(copy), p);
}

std::int64_t LatencyRecorder::max() const
{
    std::lock_guard lock(mutex_);
    return samples_.empty() ? 0 : *std::max_element(samples_.begin(), samples_.end());
}

void LatencyRecorder::clear()
{
    std::lock_guard lock(mutex_);
    samples_.clear();
}

} // namespace vlab
