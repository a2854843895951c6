#ifndef LFPP_PARALLEL_HPP
#define LFPP_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lfpp {

inline unsigned default_jobs() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on up to `jobs` worker threads.
/// Each index runs exactly once; results must be written to per-index slots.
/// The first exception thrown by any body is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t count, unsigned jobs, Body&& body) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(count);
            }
        }
    };
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace lfpp

#endif  // LFPP_PARALLEL_HPP
