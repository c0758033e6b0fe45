#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace cgrips {

inline unsigned default_thread_count() {
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs task(i) for every i in [0, count) on up to `threads` workers. Workers
// pull the next index from a shared counter, so uneven tasks balance out.
// The first exception thrown by any task is rethrown after all workers join.
// Tasks must write only to per-index output slots.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& task) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::atomic_flag error_slot = ATOMIC_FLAG_INIT;

    auto worker = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                task(i);
            } catch (...) {
                if (!error_slot.test_and_set()) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cgrips
