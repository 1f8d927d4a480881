#pragma once
// Static-partition parallel for. Shards write disjoint outputs, so results
// do not depend on the thread count.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace rocbf::detail {

inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    if (hw <= 1 || n < 512) {
        fn(0, n);
        return;
    }
    const std::size_t nthreads = std::min<std::size_t>(hw, n);
    const std::size_t chunk = (n + nthreads - 1) / nthreads;
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < nthreads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back(fn, begin, end);
    }
    for (auto& th : threads) th.join();
}

}  // namespace rocbf::detail
