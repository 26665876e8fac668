#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tvphase {

inline unsigned default_threads()
{
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/* Runs body(i) for i in [0, count) on up to `threads` workers. Work items are
 * claimed from a shared counter; callers write results by index so the outcome
 * does not depend on the schedule. The first exception is rethrown. */
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body)
{
    if (count == 0) { return; }
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) { body(i); }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) { return; }
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) { failure = std::current_exception(); }
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) { pool.emplace_back(worker); }
    pool.clear();
    if (failure) { std::rethrow_exception(failure); }
}

} // namespace tvphase
