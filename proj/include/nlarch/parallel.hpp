#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nlarch {

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). The first exception thrown by any task is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = 0) {
    if (n == 0) return;
    unsigned hw = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    hw = static_cast<unsigned>(std::min<std::size_t>(hw, n));
    if (hw <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(hw);
    for (unsigned t = 0; t < hw; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace nlarch
