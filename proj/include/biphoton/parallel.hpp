#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace biphoton {

/// Runs fn(lo, hi) over a static contiguous partition of [0, total) on
/// `workers` threads. fn must only touch state disjoint per range or merged
/// by the caller afterwards. workers <= 1 runs inline. First exception wins
/// and is rethrown on the calling thread.
template <typename Fn>
void parallel_ranges(std::size_t total, unsigned workers, Fn&& fn) {
    if (total == 0) return;
    if (workers <= 1 || total == 1) {
        fn(std::size_t{0}, total);
        return;
    }
    const std::size_t nchunk = std::min<std::size_t>(workers, total);
    std::vector<std::thread> pool;
    pool.reserve(nchunk);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t c = 0; c < nchunk; ++c) {
        const std::size_t lo = total * c / nchunk;
        const std::size_t hi = total * (c + 1) / nchunk;
        pool.emplace_back([&, lo, hi] {
            try {
                fn(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline unsigned default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

} // namespace biphoton
