#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace spde {

// Worker count comes from SPDE_LAB_THREADS only; it must never influence
// numerical results, so callers write into per-index slots and reduce in
// index order afterwards.
inline int thread_count() {
    if (const char* env = std::getenv("SPDE_LAB_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n) across threads in contiguous index blocks.
template <class Fn>
void parallel_for(long n, Fn&& fn) {
    if (n <= 0) return;
    int workers = std::min<long>(thread_count(), n);
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    long chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        long begin = w * chunk;
        long end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (long i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace spde
