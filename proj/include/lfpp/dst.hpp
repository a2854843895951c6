#ifndef LFPP_DST_HPP
#define LFPP_DST_HPP

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "errors.hpp"

namespace lfpp {

namespace detail {

struct FftwBuffer {
    explicit FftwBuffer(std::size_t count) : data(fftw_alloc_real(count)), size(count) {
        if (!data) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;

    double* data;
    std::size_t size;
};

// FFTW's planner is not thread-safe; plan execution on fresh arrays is.
// Plans are created once per size with FFTW_ESTIMATE so the chosen algorithm
// (and therefore the rounding) does not vary between runs.
class DstPlanCache {
public:
    static DstPlanCache& instance() {
        static DstPlanCache cache;
        return cache;
    }

    fftw_plan plan_2d(int size) {
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(size); it != plans_.end()) return it->second;
        FftwBuffer scratch(static_cast<std::size_t>(size) * size);
        fftw_plan plan = fftw_plan_r2r_2d(size, size, scratch.data, scratch.data, FFTW_RODFT00, FFTW_RODFT00,
                                          FFTW_ESTIMATE);
        if (!plan) throw Error("FFTW could not plan a DST-I of size " + std::to_string(size));
        plans_.emplace(size, plan);
        return plan;
    }

    ~DstPlanCache() {
        for (auto& [size, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    DstPlanCache() = default;
    std::mutex mutex_;
    std::map<int, fftw_plan> plans_;
};

}  // namespace detail

/// Unnormalized 2D DST-I of a size x size row-major array, in place:
///   out[k1][k2] = 4 * sum_{j1,j2} in[j1][j2] sin(pi (j1+1)(k1+1)/(size+1)) sin(pi (j2+1)(k2+1)/(size+1)).
/// Applying it twice multiplies by (2(size+1))^2.
inline void dst1_2d(std::span<double> data, int size) {
    if (size < 1 || data.size() != static_cast<std::size_t>(size) * size) {
        throw InvalidArgument("dst1_2d: array does not match size");
    }
    fftw_plan plan = detail::DstPlanCache::instance().plan_2d(size);
    detail::FftwBuffer buf(data.size());
    std::copy(data.begin(), data.end(), buf.data);
    fftw_execute_r2r(plan, buf.data, buf.data);
    std::copy(buf.data, buf.data + data.size(), data.begin());
}

}  // namespace lfpp

#endif  // LFPP_DST_HPP
