#ifndef RITZ_PARALLEL_HPP
#define RITZ_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ritz {

/// Worker count: RITZ_THREADS if set and positive, else the hardware concurrency.
inline int thread_count()
{
    if (const char* env = std::getenv("RITZ_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Run fn(task, worker) for task in [0, count). Tasks are claimed dynamically,
 * so callers must write results into per-task slots and reduce them in task
 * order afterwards to stay deterministic.
 */
template <class Fn>
void parallel_for(int count, Fn&& fn)
{
    const int workers = std::min(thread_count(), count);
    if (workers <= 1) {
        for (int t = 0; t < count; ++t) fn(t, 0);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int t = next++; t < count; t = next++) {
                    try {
                        fn(t, w);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

} // namespace ritz

#endif // RITZ_PARALLEL_HPP
