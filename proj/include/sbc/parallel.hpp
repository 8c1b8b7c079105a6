#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace sbc {

/// Run fn(i) for i in [0, n). Work items must write to disjoint slots;
/// callers do any reductions afterwards in fixed index order, which keeps
/// results identical for every thread count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int k = std::min(threads, n);
    pool.reserve(k);
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

} // namespace sbc
