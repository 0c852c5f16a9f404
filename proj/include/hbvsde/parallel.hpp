#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace hbvsde {

/// Environment variable selecting the worker-thread count.
inline constexpr const char* kThreadsEnv = "HBVSDE_THREADS";

/// Value of HBVSDE_THREADS if it is a positive integer, else the hardware concurrency.
inline std::size_t default_worker_count()
{
    if (const char* env = std::getenv(kThreadsEnv)) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/**
 * @brief Calls body(i) for every i in [0, n) on up to `workers` threads.
 *
 * `body` must only write state owned by index i. If any call throws, the
 * exception of the lowest failing index is rethrown, independent of thread
 * count and scheduling.
 */
template <class Body>
void parallel_for(std::size_t n, std::size_t workers, Body&& body)
{
    workers = std::max<std::size_t>(1, std::min(workers, n));
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> first_failure{none};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::size_t> error_index(workers, none);

    auto run = [&](std::size_t w) {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n || i > first_failure.load(std::memory_order_relaxed))
                return;
            try {
                body(i);
            } catch (...) {
                if (i < error_index[w]) {
                    error_index[w] = i;
                    errors[w] = std::current_exception();
                }
                std::size_t cur = first_failure.load();
                while (i < cur && !first_failure.compare_exchange_weak(cur, i)) {
                }
            }
        }
    };

    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(run, w);
        for (auto& t : pool)
            t.join();
    }

    std::size_t best = none;
    std::exception_ptr err;
    for (std::size_t w = 0; w < workers; ++w)
        if (error_index[w] < best) {
            best = error_index[w];
            err = errors[w];
        }
    if (err)
        std::rethrow_exception(err);
}

}  // namespace hbvsde
