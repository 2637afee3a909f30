#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lanecast {

// Worker budget for the few embarrassingly parallel stages (per-track
// segment extraction, sweep cells).  LANECAST_WORKERS overrides the
// hardware default; anything below 1 is clamped.
inline unsigned worker_count() {
    if (const char* env = std::getenv("LANECAST_WORKERS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
        return 1;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// Runs body(i) for i in [0, n) on a bounded pool.  Callers must write
// results into index-addressed slots so the outcome is independent of
// scheduling.  The first exception thrown by any worker is rethrown.
template <typename Body>
void parallel_for(std::size_t n, const Body& body, unsigned workers = worker_count()) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    if (workers > n) workers = static_cast<unsigned>(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lanecast
