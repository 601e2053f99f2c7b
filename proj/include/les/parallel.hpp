#pragma once
#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace les {

/// Number of workers to use when the caller passes 0.
inline unsigned default_threads()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Runs body(i) for i in [0, count) on up to `threads` workers. Results must
 * be written to per-index slots so the outcome does not depend on the
 * schedule. The first exception thrown by any task is rethrown.
 */
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body)
{
    if (threads == 0) threads = default_threads();
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        next = count;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

} // namespace les
