#ifndef LFPP_METRIC_HPP
#define LFPP_METRIC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coupling.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "gff.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace lfpp {

enum class MetricKind { DLFPP, LatticeLFPP, FineLFPP };

inline std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::DLFPP: return "dlfpp";
        case MetricKind::LatticeLFPP: return "lattice-lfpp";
        case MetricKind::FineLFPP: return "fine-lfpp";
    }
    return "unknown";
}

inline MetricKind parse_metric_kind(std::string_view s) {
    if (s == "dlfpp") return MetricKind::DLFPP;
    if (s == "lattice-lfpp") return MetricKind::LatticeLFPP;
    if (s == "fine-lfpp") return MetricKind::FineLFPP;
    throw InvalidArgument("unknown metric kind '" + std::string(s) + "'");
}

/// Vertex-set to vertex-set query restricted to a mask.
struct DistanceQuery {
    std::vector<LatticePoint> source;
    std::vector<LatticePoint> target;
    DomainMask mask;
    MetricKind kind = MetricKind::DLFPP;
    double xi = 0.0;
    bool want_geodesic = false;
};

struct DistanceResult {
    double distance = std::numeric_limits<double>::infinity();  ///< +inf when unreachable
    std::optional<std::vector<LatticePoint>> geodesic;
    std::uint64_t relaxations = 0;

    bool reachable() const noexcept { return std::isfinite(distance); }
};

namespace detail {

inline void validate_query(const DistanceQuery& q, int n) {
    if (!(q.xi > 0.0)) throw InvalidArgument("xi must be positive");
    if (q.mask.n() != n) throw InvalidArgument("query mask scale does not match the field");
    if (q.source.empty() || q.target.empty()) throw InvalidArgument("source and target sets must be nonempty");
    for (const auto& set : {std::cref(q.source), std::cref(q.target)}) {
        for (const auto& p : set.get()) {
            if (!q.mask.contains(p)) {
                throw InvalidArgument("query vertex (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                                      ") is outside the mask");
            }
        }
    }
}

struct HeapEntry {
    double dist;
    std::uint32_t index;
    bool operator>(const HeapEntry& o) const noexcept { return dist > o.dist || (dist == o.dist && index > o.index); }
};

using MinHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>>;

inline std::vector<LatticePoint> trace_path(int n, std::span<const std::int32_t> parent, std::uint32_t end) {
    std::vector<LatticePoint> path;
    for (std::int64_t v = end; v >= 0; v = parent[static_cast<std::size_t>(v)]) {
        path.push_back({static_cast<int>(v % (n + 1)), static_cast<int>(v / (n + 1))});
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace detail

/// Minimum over nearest-neighbour paths inside `mask` from any source to any
/// target of the sum of vertex weights, both endpoints included; zero when the
/// sets intersect. Multi-source Dijkstra with early exit on the first settled target.
inline DistanceResult vertex_weighted_distance(int n, std::span<const double> weight, const DomainMask& mask,
                                               std::span<const LatticePoint> source,
                                               std::span<const LatticePoint> target, bool want_geodesic) {
    DistanceResult result;
    const std::size_t count = vertex_count(n);
    std::vector<std::uint8_t> is_target(count, 0);
    for (const auto& t : target) is_target[vertex_index(n, t.x, t.y)] = 1;
    for (const auto& s : source) {
        if (is_target[vertex_index(n, s.x, s.y)]) {
            result.distance = 0.0;
            if (want_geodesic) result.geodesic = std::vector<LatticePoint>{s};
            return result;
        }
    }

    std::vector<double> dist(count, std::numeric_limits<double>::infinity());
    std::vector<std::int32_t> parent(want_geodesic ? count : 0, -1);
    std::vector<std::uint8_t> settled(count, 0);
    detail::MinHeap heap;
    for (const auto& s : source) {
        const auto i = static_cast<std::uint32_t>(vertex_index(n, s.x, s.y));
        if (weight[i] < dist[i]) {
            dist[i] = weight[i];
            heap.push({dist[i], i});
        }
    }
    const int stride = n + 1;
    while (!heap.empty()) {
        const auto [d, i] = heap.top();
        heap.pop();
        if (settled[i]) continue;
        settled[i] = 1;
        if (is_target[i]) {
            result.distance = d;
            if (want_geodesic) result.geodesic = detail::trace_path(n, parent, i);
            return result;
        }
        const int x = static_cast<int>(i % stride), y = static_cast<int>(i / stride);
        const std::array<std::pair<int, int>, 4> steps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (auto [dx, dy] : steps) {
            const int nx = x + dx, ny = y + dy;
            if (!mask.contains(nx, ny)) continue;
            const auto j = static_cast<std::uint32_t>(vertex_index(n, nx, ny));
            if (settled[j]) continue;
            ++result.relaxations;
            const double cand = d + weight[j];
            if (cand < dist[j]) {
                dist[j] = cand;
                if (want_geodesic) parent[j] = static_cast<std::int32_t>(i);
                heap.push({cand, j});
            }
        }
    }
    return result;  // unreachable
}

/// exp(xi * scale * field(v)) at every vertex.
inline std::vector<double> exponential_weights(const FieldSample& field, double xi, double scale) {
    std::vector<double> w(field.values.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(xi * scale * field.values[i]);
    return w;
}

/// Cost of a vertex path under vertex-sum weights; a one-vertex path costs 0.
inline double vertex_path_cost(int n, std::span<const double> weight, std::span<const LatticePoint> path) {
    if (path.size() <= 1) return 0.0;
    double c = 0.0;
    for (const auto& p : path) c += weight[vertex_index(n, p.x, p.y)];
    return c;
}

/// Discrete LFPP: vertex weights exp(xi * sqrt(pi/2) * eta(v)).
inline DistanceResult dlfpp_distance(const FieldSample& field, const DistanceQuery& q) {
    if (q.kind != MetricKind::DLFPP) throw InvalidArgument("dlfpp_distance needs a DLFPP query");
    detail::validate_query(q, field.n);
    const auto w = exponential_weights(field, q.xi, kSqrtHalfPi);
    return vertex_weighted_distance(field.n, w, q.mask, q.source, q.target, q.want_geodesic);
}

/// Lattice LFPP: vertex weights exp(xi * h_1(v)) from a circle-average field.
inline DistanceResult lattice_lfpp_distance(const FieldSample& circ, const DistanceQuery& q) {
    if (q.kind != MetricKind::LatticeLFPP) throw InvalidArgument("lattice_lfpp_distance needs a LatticeLFPP query");
    detail::validate_query(q, circ.n);
    const auto w = exponential_weights(circ, q.xi, 1.0);
    return vertex_weighted_distance(circ.n, w, q.mask, q.source, q.target, q.want_geodesic);
}

// ---------------------------------------------------------------------------
// Fine-mesh continuum LFPP

/// Conformal factor data for the fine-mesh metric: H at fine vertices, in
/// continuum units (already multiplied by sqrt(pi/2)). Scale n*m.
struct FineMetricField {
    int n = 0;  ///< coarse scale
    int m = 1;  ///< fine vertices per coarse unit
    DomainMask mask;
    std::vector<double> h;  ///< (nm+1)^2 values; only entries inside `mask` are meaningful

    int fine_n() const noexcept { return n * m; }
};

/// H = sqrt(pi/2) * unit circle average of the coupling's fine field at every
/// fine vertex of `fine_mask`. Throws BoundaryProximity if a masked vertex is
/// closer than one coarse unit to the boundary of nS.
inline FineMetricField fine_metric_field(const CouplingSample& c, const DomainMask& fine_mask) {
    const int N = c.n * c.m;
    if (fine_mask.n() != N) throw InvalidArgument("fine mask must have scale n*m");
    FineMetricField f{c.n, c.m, fine_mask, std::vector<double>(vertex_count(N), 0.0)};
    for (int Y = 0; Y <= N; ++Y) {
        for (int X = 0; X <= N; ++X) {
            if (!fine_mask.contains(X, Y)) continue;
            if (X < c.m || Y < c.m || X > N - c.m || Y > N - c.m) {
                throw BoundaryProximity("unit circle around fine vertex (" + std::to_string(X) + "," +
                                        std::to_string(Y) + ") leaves the domain");
            }
            f.h[vertex_index(N, X, Y)] = kSqrtHalfPi * raw_circle_mean(c.fine, X, Y, c.m);
        }
    }
    return f;
}

/// [m z] for a point z in coarse coordinates.
inline LatticePoint snap_to_fine(RealPoint z, int m) {
    return {static_cast<int>(round_half_down(z.x * m)), static_cast<int>(round_half_down(z.y * m))};
}

/// Edge cost of the fine-mesh metric between fine vertices a and b.
inline double fine_edge_cost(const FineMetricField& f, double xi, LatticePoint a, LatticePoint b) {
    const int N = f.fine_n();
    const double len = std::hypot(a.x - b.x, a.y - b.y) / f.m;
    return len * 0.5 * (std::exp(xi * f.h[vertex_index(N, a.x, a.y)]) + std::exp(xi * f.h[vertex_index(N, b.x, b.y)]));
}

inline double fine_path_cost(const FineMetricField& f, double xi, std::span<const LatticePoint> path) {
    double c = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) c += fine_edge_cost(f, xi, path[k - 1], path[k]);
    return c;
}

/// Shortest path on the 8-neighbour fine lattice inside the fine mask with
/// trapezoid edge costs |a-b|/m * (e^{xi H(a)} + e^{xi H(b)})/2. Diagonal
/// steps need the whole unit cell inside the mask. z, w in coarse coordinates.
inline DistanceResult fine_lfpp_distance(const FineMetricField& f, RealPoint z, RealPoint w, double xi,
                                         bool want_geodesic = false) {
    if (!(xi > 0.0)) throw InvalidArgument("xi must be positive");
    const int N = f.fine_n();
    const LatticePoint a = snap_to_fine(z, f.m), b = snap_to_fine(w, f.m);
    if (!f.mask.contains(a) || !f.mask.contains(b)) throw InvalidArgument("endpoint outside the fine region");

    DistanceResult result;
    const auto src = static_cast<std::uint32_t>(vertex_index(N, a.x, a.y));
    const auto dst = static_cast<std::uint32_t>(vertex_index(N, b.x, b.y));
    if (src == dst) {
        result.distance = 0.0;
        if (want_geodesic) result.geodesic = std::vector<LatticePoint>{a};
        return result;
    }
    std::vector<double> expw(vertex_count(N), 0.0);
    for (std::size_t i = 0; i < expw.size(); ++i)
        if (f.mask.test(i)) expw[i] = std::exp(xi * f.h[i]);

    const std::size_t count = vertex_count(N);
    std::vector<double> dist(count, std::numeric_limits<double>::infinity());
    std::vector<std::int32_t> parent(want_geodesic ? count : 0, -1);
    std::vector<std::uint8_t> settled(count, 0);
    detail::MinHeap heap;
    dist[src] = 0.0;
    heap.push({0.0, src});
    const double inv_m = 1.0 / f.m;
    const double diag = std::sqrt(2.0) * inv_m;
    const int stride = N + 1;
    while (!heap.empty()) {
        const auto [d, i] = heap.top();
        heap.pop();
        if (settled[i]) continue;
        settled[i] = 1;
        if (i == dst) {
            result.distance = d;
            if (want_geodesic) result.geodesic = detail::trace_path(N, parent, i);
            return result;
        }
        const int x = static_cast<int>(i % stride), y = static_cast<int>(i / stride);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = x + dx, ny = y + dy;
                if (!f.mask.contains(nx, ny)) continue;
                if (dx != 0 && dy != 0 && (!f.mask.contains(x + dx, y) || !f.mask.contains(x, y + dy))) continue;
                const auto j = static_cast<std::uint32_t>(vertex_index(N, nx, ny));
                if (settled[j]) continue;
                ++result.relaxations;
                const double len = (dx != 0 && dy != 0) ? diag : inv_m;
                const double cand = d + len * 0.5 * (expw[i] + expw[j]);
                if (cand < dist[j]) {
                    dist[j] = cand;
                    if (want_geodesic) parent[j] = static_cast<std::int32_t>(i);
                    heap.push({cand, j});
                }
            }
        }
    }
    return result;
}

/// Convenience overload: builds the fine metric on rasterize(region, n*m).
inline DistanceResult fine_lfpp_distance(const CouplingSample& c, RealPoint z, RealPoint w, const RectRegion& region,
                                         double xi, bool want_geodesic = false) {
    const auto f = fine_metric_field(c, rasterize(region, c.n * c.m));
    return fine_lfpp_distance(f, z, w, xi, want_geodesic);
}

// ---------------------------------------------------------------------------
// DLFPP vs fine LFPP comparison

struct PairComparison {
    RealPoint z;
    RealPoint w;
    double dlfpp = 0.0;       ///< D([z],[w]; [nP])
    double correction = 0.0;  ///< exp(xi sqrt(pi/2) eta([z]))
    double fine = 0.0;        ///< fine-mesh LFPP distance D(z,w; nP)
    double r = 0.0;           ///< |log(dlfpp + correction) - log(fine)| / log n
};

struct CompareSummary {
    double median = 0.0;
    double max = 0.0;
    std::vector<PairComparison> pairs;
};

/// Precomputed per-coupling state for repeated pair comparisons.
class MetricComparator {
public:
    MetricComparator(const CouplingSample& c, const RectRegion& region, double xi)
        : coupling_(&c), xi_(xi), coarse_mask_(rasterize(checked(region, xi), c.n)),
          fine_(fine_metric_field(c, rasterize(region, c.n * c.m))),
          weights_(exponential_weights(c.coarse, xi, kSqrtHalfPi)) {}

    const DomainMask& coarse_mask() const noexcept { return coarse_mask_; }

    /// z, w in coarse coordinates, inside nP.
    PairComparison compare(RealPoint z, RealPoint w) const {
        const int n = coupling_->n;
        PairComparison out{z, w};
        const LatticePoint lz{static_cast<int>(round_half_down(z.x)), static_cast<int>(round_half_down(z.y))};
        const LatticePoint lw{static_cast<int>(round_half_down(w.x)), static_cast<int>(round_half_down(w.y))};
        if (!coarse_mask_.contains(lz) || !coarse_mask_.contains(lw)) {
            throw InvalidArgument("comparison endpoint outside [nP]");
        }
        const std::array<LatticePoint, 1> s{lz}, t{lw};
        const auto d = vertex_weighted_distance(n, weights_, coarse_mask_, s, t, false);
        if (!d.reachable()) throw InvalidArgument("endpoints disconnected in [nP]");
        out.dlfpp = d.distance;
        out.correction = weights_[vertex_index(n, lz.x, lz.y)];
        const auto fd = fine_lfpp_distance(fine_, z, w, xi_);
        if (!fd.reachable()) throw InvalidArgument("endpoints disconnected in the fine region");
        out.fine = fd.distance;
        out.r = std::abs(std::log(out.dlfpp + out.correction) - std::log(out.fine)) / std::log(static_cast<double>(n));
        return out;
    }

private:
    static const RectRegion& checked(const RectRegion& region, double xi) {
        if (!(xi > 0.0)) throw InvalidArgument("xi must be positive");
        check_interior_region(region);
        return region;
    }

    const CouplingSample* coupling_;
    double xi_;
    DomainMask coarse_mask_;
    FineMetricField fine_;
    std::vector<double> weights_;
};

/// r statistics over `pair_count` distinct coarse-vertex pairs drawn uniformly
/// from [nP] (deterministic in `seed`).
inline CompareSummary compare_metrics(const CouplingSample& c, const RectRegion& region, std::size_t pair_count,
                                      double xi, std::uint64_t seed, unsigned jobs = default_jobs()) {
    const MetricComparator comparator(c, region, xi);
    const auto pts = comparator.coarse_mask().points();
    if (pts.size() < 2) throw InvalidArgument("region has fewer than two lattice points");
    const CounterRng rng(seed, kStreamPairs);
    std::vector<std::pair<LatticePoint, LatticePoint>> chosen;
    for (std::uint64_t k = 0; chosen.size() < pair_count; ++k) {
        const auto a = pts[rng.bits(2 * k) % pts.size()];
        const auto b = pts[rng.bits(2 * k + 1) % pts.size()];
        if (a != b) chosen.emplace_back(a, b);
    }
    CompareSummary summary;
    summary.pairs.resize(pair_count);
    parallel_for(pair_count, jobs, [&](std::size_t i) {
        const auto [a, b] = chosen[i];
        summary.pairs[i] = comparator.compare(RealPoint{double(a.x), double(a.y)}, RealPoint{double(b.x), double(b.y)});
    });
    std::vector<double> rs;
    for (const auto& p : summary.pairs) rs.push_back(p.r);
    if (!rs.empty()) {
        std::sort(rs.begin(), rs.end());
        const std::size_t k = rs.size();
        summary.median = k % 2 ? rs[k / 2] : 0.5 * (rs[k / 2 - 1] + rs[k / 2]);
        summary.max = rs.back();
    }
    return summary;
}

}  // namespace lfpp

#endif  // LFPP_METRIC_HPP
