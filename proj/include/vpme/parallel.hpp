#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace vpme {

/// Execution policy for particle loops. In strict mode every reduction runs
/// serially in index order, so results are bitwise reproducible regardless of
/// the machine's core count.
struct ExecutionPolicy {
    bool strict_reduce = false;
    unsigned max_threads = 0;  // 0 = hardware concurrency

    unsigned thread_count(std::size_t work_items) const {
        if (strict_reduce) return 1;
        unsigned n = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
        // below this many items per thread the spawn cost dominates
        constexpr std::size_t min_chunk = 8192;
        return static_cast<unsigned>(std::clamp<std::size_t>(work_items / min_chunk, 1, n));
    }
};

/// Runs body(chunk_index, begin, end) over contiguous chunks of [0, count).
/// Returns the number of chunks used.
template <class Body>
unsigned parallel_chunks(std::size_t count, const ExecutionPolicy& policy, Body&& body) {
    const unsigned chunks = policy.thread_count(count);
    if (chunks <= 1) {
        body(0u, std::size_t{0}, count);
        return 1;
    }
    std::vector<std::thread> workers;
    workers.reserve(chunks - 1);
    const std::size_t per = (count + chunks - 1) / chunks;
    for (unsigned c = 1; c < chunks; ++c) {
        const std::size_t b = std::min(count, c * per);
        const std::size_t e = std::min(count, b + per);
        workers.emplace_back([&body, c, b, e] { body(c, b, e); });
    }
    body(0u, std::size_t{0}, std::min(count, per));
    for (auto& w : workers) w.join();
    return chunks;
}

}  // namespace vpme
