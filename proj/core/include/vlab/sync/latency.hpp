// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <vector>

namespace vlab {

// Thread-safe sample sink for commit-to-send delays (nanoseconds).
class LatencyRecorder {
public:
    void record(std::int64_t ns);
    std::size_t count() const;
    // Nearest-rank percentile, p in (0, 100]; 0 when empty.
    std::int64_t percentile(double p) const;
    std::int64_t max() const;
    void clear();

private:
    mutable std::mutex mutex_;
    std::vector<std::int64_t> samples_;
};

// Nearest-rank percentile of an unsorted sample.
std::int64_t nearest_rank(std::vector<std::int64_t> samples, double p);

} // namespace vlab
