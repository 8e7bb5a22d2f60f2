#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace rigsplat {

// Worker count used by parallel loops. Resolution order:
// explicit argument > RIGSPLAT_THREADS env var > hardware concurrency.
inline int default_thread_count() {
    if (const char* env = std::getenv("RIGSPLAT_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one
// per worker. Output written by fn must go to disjoint, index-addressed
// locations so the result is identical for any worker count.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn, int threads = 0) {
    if (n <= 0) return;
    if (threads <= 0) threads = default_thread_count();
    threads = static_cast<int>(std::min<int64_t>(threads, n));
    if (threads <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int64_t begin = t * chunk;
        const int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (int64_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace rigsplat
