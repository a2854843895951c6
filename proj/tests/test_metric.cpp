#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

#include "lfpp/metric.hpp"
#include "oracles.hpp"

using namespace lfpp;

namespace {

using namespace lfpp::oracle;

FieldSample synthetic(int n, std::vector<double> values, FieldKind kind = FieldKind::CoarseDGFF) {
    FieldSample f(n, 1, kind, 0);
    f.values = std::move(values);
    return f;
}

std::vector<double> gaussian_values(int n, std::mt19937_64& gen, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    std::vector<double> v(vertex_count(n));
    for (auto& x : v) x = g(gen);
    return v;
}

DistanceQuery point_query(int n, LatticePoint u, LatticePoint v, double xi, MetricKind kind = MetricKind::DLFPP) {
    return {{u}, {v}, DomainMask::full(n), kind, xi, true};
}

DomainMask random_mask(int n, std::mt19937_64& gen, double keep) {
    std::bernoulli_distribution b(keep);
    DomainMask mask(n, false);
    for (int y = 0; y <= n; ++y)
        for (int x = 0; x <= n; ++x)
            if (b(gen)) mask.set(x, y);
    return mask;
}

LatticePoint random_point(int n, std::mt19937_64& gen) {
    std::uniform_int_distribution<int> u(0, n);
    return {u(gen), u(gen)};
}

void expect_valid_geodesic(int n, const std::vector<double>& w, const DomainMask& mask, const DistanceResult& r,
                           const std::vector<LatticePoint>& src, const std::vector<LatticePoint>& dst) {
    ASSERT_TRUE(r.geodesic.has_value());
    const auto& path = *r.geodesic;
    ASSERT_FALSE(path.empty());
    EXPECT_NE(std::find(src.begin(), src.end(), path.front()), src.end());
    EXPECT_NE(std::find(dst.begin(), dst.end(), path.back()), dst.end());
    for (std::size_t k = 0; k < path.size(); ++k) {
        EXPECT_TRUE(mask.contains(path[k]));
        if (k > 0) EXPECT_EQ(std::abs(path[k].x - path[k - 1].x) + std::abs(path[k].y - path[k - 1].y), 1);
    }
    EXPECT_NEAR(vertex_path_cost(n, w, path), r.distance, 1e-12 * std::max(1.0, r.distance));
}

}  // namespace

TEST(Dlfpp, SameVertexIsZero) {
    const auto f = synthetic(4, std::vector<double>(25, 1.3));
    const auto r = dlfpp_distance(f, point_query(4, {2, 2}, {2, 2}, 0.4));
    EXPECT_EQ(r.distance, 0.0);
    ASSERT_TRUE(r.geodesic);
    EXPECT_EQ(r.geodesic->size(), 1u);
}

TEST(Dlfpp, AdjacentOnFlatFieldCountsBothEndpoints) {
    const auto f = synthetic(4, std::vector<double>(25, 0.0));
    EXPECT_DOUBLE_EQ(dlfpp_distance(f, point_query(4, {1, 1}, {2, 1}, 0.4)).distance, 2.0);
    const auto circ = synthetic(4, std::vector<double>(25, 0.0), FieldKind::CircleAverage);
    EXPECT_DOUBLE_EQ(lattice_lfpp_distance(circ, point_query(4, {1, 1}, {1, 2}, 0.4, MetricKind::LatticeLFPP)).distance,
                     2.0);
}

TEST(Dlfpp, ThreeByThreeCheapCentre) {
    const double xi = 0.4;
    std::vector<double> eta(9, 0.0);
    eta[vertex_index(2, 1, 1)] = std::log(0.5) / (xi * kSqrtHalfPi);
    const auto f = synthetic(2, eta);
    const auto mask = DomainMask::full(2);
    const auto r = dlfpp_distance(f, point_query(2, {0, 0}, {2, 2}, xi));
    EXPECT_NEAR(r.distance, 4.5, 1e-12);
    EXPECT_NEAR(enumerate_vertex_paths(2, exponential_weights(f, xi, kSqrtHalfPi), mask, {0, 0}, {2, 2}), 4.5, 1e-12);
    ASSERT_TRUE(r.geodesic);
    EXPECT_NE(std::find(r.geodesic->begin(), r.geodesic->end(), LatticePoint{1, 1}), r.geodesic->end());

    std::vector<double> h(9, 0.0);
    h[vertex_index(2, 1, 1)] = std::log(0.5) / xi;
    const auto circ = synthetic(2, h, FieldKind::CircleAverage);
    EXPECT_NEAR(lattice_lfpp_distance(circ, point_query(2, {0, 0}, {2, 2}, xi, MetricKind::LatticeLFPP)).distance, 4.5,
                1e-12);

    // Without the cheap centre every monotone route costs 5.
    const auto flat = synthetic(2, std::vector<double>(9, 0.0));
    EXPECT_DOUBLE_EQ(dlfpp_distance(flat, point_query(2, {0, 0}, {2, 2}, xi)).distance, 5.0);
}

TEST(Dlfpp, LatticeLfppWithScaledFieldEqualsDlfpp) {
    std::mt19937_64 gen(7);
    const int n = 10;
    const auto eta = gaussian_values(n, gen);
    std::vector<double> h(eta.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = kSqrtHalfPi * eta[i];
    for (int k = 0; k < 20; ++k) {
        const auto u = random_point(n, gen), v = random_point(n, gen);
        const double a = dlfpp_distance(synthetic(n, eta), point_query(n, u, v, 0.8)).distance;
        const double b =
            lattice_lfpp_distance(synthetic(n, h, FieldKind::CircleAverage), point_query(n, u, v, 0.8, MetricKind::LatticeLFPP))
                .distance;
        EXPECT_NEAR(a, b, 1e-12 * a);
    }
}

TEST(Dlfpp, UnreachableIsInfinite) {
    DomainMask mask = DomainMask::full(4);
    for (int y = 0; y <= 4; ++y) mask.set(2, y, false);
    const auto f = synthetic(4, std::vector<double>(25, 0.0));
    DistanceQuery q{{{0, 0}}, {{4, 4}}, mask, MetricKind::DLFPP, 0.4, true};
    const auto r = dlfpp_distance(f, q);
    EXPECT_FALSE(r.reachable());
    EXPECT_TRUE(std::isinf(r.distance));
    EXPECT_FALSE(r.geodesic);
}

TEST(Dlfpp, RejectsBadQueries) {
    const auto f = synthetic(4, std::vector<double>(25, 0.0));
    EXPECT_THROW(dlfpp_distance(f, point_query(4, {0, 0}, {1, 1}, 0.0)), InvalidArgument);
    EXPECT_THROW(dlfpp_distance(f, point_query(4, {0, 0}, {1, 1}, 0.4, MetricKind::LatticeLFPP)), InvalidArgument);
    DomainMask mask(4, true);
    mask.set(1, 1, false);
    EXPECT_THROW(dlfpp_distance(f, DistanceQuery{{{0, 0}}, {{1, 1}}, mask, MetricKind::DLFPP, 0.4}), InvalidArgument);
    EXPECT_THROW(dlfpp_distance(f, DistanceQuery{{}, {{1, 1}}, DomainMask::full(4), MetricKind::DLFPP, 0.4}),
                 InvalidArgument);
    EXPECT_THROW(dlfpp_distance(f, point_query(3, {0, 0}, {1, 1}, 0.4)), InvalidArgument);
}

TEST(Dlfpp, MatchesExhaustiveEnumerationOnSmallGrids) {
    std::mt19937_64 gen(11);
    for (int inst = 0; inst < 60; ++inst) {
        const int n = 2 + inst % 3;  // up to 5x5 vertices
        const auto eta = gaussian_values(n, gen, 1.5);
        auto mask = random_mask(n, gen, 0.8);
        const auto u = random_point(n, gen), v = random_point(n, gen);
        mask.set(u.x, u.y);
        mask.set(v.x, v.y);
        const double xi = 0.3 + 0.1 * (inst % 5);
        const auto f = synthetic(n, eta);
        const auto w = exponential_weights(f, xi, kSqrtHalfPi);
        const auto r = dlfpp_distance(f, DistanceQuery{{u}, {v}, mask, MetricKind::DLFPP, xi, true});
        const double oracle = enumerate_vertex_paths(n, w, mask, u, v);
        if (std::isinf(oracle)) {
            EXPECT_FALSE(r.reachable());
        } else {
            EXPECT_NEAR(r.distance, oracle, 1e-12 * oracle);
            expect_valid_geodesic(n, w, mask, r, {u}, {v});
        }
    }
}

TEST(Dlfpp, SetToSetMatchesMinimumOverPairsAndBellmanFord) {
    std::mt19937_64 gen(12);
    for (int inst = 0; inst < 200; ++inst) {
        const int n = 3 + inst % 6;  // n <= 8
        const auto eta = gaussian_values(n, gen);
        auto mask = random_mask(n, gen, 0.85);
        std::vector<LatticePoint> src, dst;
        for (int k = 0; k < 1 + inst % 3; ++k) src.push_back(random_point(n, gen));
        for (int k = 0; k < 1 + (inst / 3) % 3; ++k) dst.push_back(random_point(n, gen));
        for (auto p : src) mask.set(p.x, p.y);
        for (auto p : dst) mask.set(p.x, p.y);
        const auto f = synthetic(n, eta);
        const double xi = 0.5;
        const auto w = exponential_weights(f, xi, kSqrtHalfPi);
        const auto r = dlfpp_distance(f, DistanceQuery{src, dst, mask, MetricKind::DLFPP, xi, true});
        const double oracle = bellman_ford(n, w, mask, src, dst);
        double pairwise = kInf;
        for (auto s : src)
            for (auto t : dst) pairwise = std::min(pairwise, bellman_ford(n, w, mask, {s}, {t}));
        EXPECT_EQ(oracle, pairwise);
        if (std::isinf(oracle)) {
            EXPECT_FALSE(r.reachable());
        } else {
            EXPECT_NEAR(r.distance, oracle, 1e-12 * std::max(1.0, oracle));
            expect_valid_geodesic(n, w, mask, r, src, dst);
        }
    }
}

TEST(Dlfpp, MaskMonotonicity) {
    std::mt19937_64 gen(13);
    const int n = 8;
    for (int inst = 0; inst < 1000; ++inst) {
        const auto f = synthetic(n, gaussian_values(n, gen));
        auto big = random_mask(n, gen, 0.9);
        auto small = big;
        for (int k = 0; k < 6; ++k) {
            const auto p = random_point(n, gen);
            small.set(p.x, p.y, false);
        }
        const auto u = random_point(n, gen), v = random_point(n, gen);
        for (auto* m : {&big, &small}) {
            m->set(u.x, u.y);
            m->set(v.x, v.y);
        }
        ASSERT_TRUE(small.subset_of(big));
        const double ds = dlfpp_distance(f, DistanceQuery{{u}, {v}, small, MetricKind::DLFPP, 0.4}).distance;
        const double db = dlfpp_distance(f, DistanceQuery{{u}, {v}, big, MetricKind::DLFPP, 0.4}).distance;
        EXPECT_GE(ds, db);
    }
}

TEST(Dlfpp, WeightPositivityLowerBound) {
    std::mt19937_64 gen(14);
    const int n = 8;
    for (int inst = 0; inst < 200; ++inst) {
        const auto f = synthetic(n, gaussian_values(n, gen));
        const auto u = random_point(n, gen), v = random_point(n, gen);
        if (u == v) continue;
        const auto w = exponential_weights(f, 0.6, kSqrtHalfPi);
        const double lo = 2.0 * *std::min_element(w.begin(), w.end());
        EXPECT_GE(dlfpp_distance(f, point_query(n, u, v, 0.6)).distance, lo);
    }
}

TEST(Dlfpp, AddingConstantScalesDistances) {
    std::mt19937_64 gen(15);
    const int n = 12;
    const double xi = 0.4;
    // Shifts whose factor exp(xi sqrt(pi/2) c) is a power of two, so scaling is exact in floating point.
    for (double factor : {2.0, 0.25, 8.0}) {
        const double c = std::log(factor) / (xi * kSqrtHalfPi);
        const auto eta = gaussian_values(n, gen);
        auto shifted = eta;
        for (auto& x : shifted) x += c;
        const auto wa = exponential_weights(synthetic(n, eta), xi, kSqrtHalfPi);
        for (int k = 0; k < 10; ++k) {
            const auto u = random_point(n, gen), v = random_point(n, gen);
            const double a = dlfpp_distance(synthetic(n, eta), point_query(n, u, v, xi)).distance;
            const double b = dlfpp_distance(synthetic(n, shifted), point_query(n, u, v, xi)).distance;
            EXPECT_NEAR(b, factor * a, 1e-12 * factor * std::max(a, 1.0));
        }
        (void)wa;
    }
}

TEST(Dlfpp, PathConcatenationCountsMiddleVertexOnce) {
    std::mt19937_64 gen(16);
    const int n = 6;
    for (int inst = 0; inst < 100; ++inst) {
        const auto f = synthetic(n, gaussian_values(n, gen));
        const auto w = exponential_weights(f, 0.5, kSqrtHalfPi);
        const auto mask = DomainMask::full(n);
        const auto u = random_point(n, gen), v = random_point(n, gen), z = random_point(n, gen);
        if (u == v || v == z || u == z) continue;
        const auto a = dlfpp_distance(f, point_query(n, u, v, 0.5));
        const auto b = dlfpp_distance(f, point_query(n, v, z, 0.5));
        std::vector<LatticePoint> joined = *a.geodesic;
        joined.insert(joined.end(), b.geodesic->begin() + 1, b.geodesic->end());
        const double wv = w[vertex_index(n, v.x, v.y)];
        EXPECT_NEAR(vertex_path_cost(n, w, joined), a.distance + b.distance - wv, 1e-12 * (a.distance + b.distance));
        EXPECT_LE(bellman_ford(n, w, mask, {u}, {z}), a.distance + b.distance - wv + 1e-12);
    }
}

TEST(Dlfpp, RelaxationCounterGrowsWithReach) {
    const auto f = synthetic(16, std::vector<double>(vertex_count(16), 0.0));
    const auto near = dlfpp_distance(f, point_query(16, {8, 8}, {9, 8}, 0.4));
    const auto far = dlfpp_distance(f, point_query(16, {0, 0}, {16, 16}, 0.4));
    EXPECT_GT(near.relaxations, 0u);
    EXPECT_GT(far.relaxations, near.relaxations);
}

// ---------------------------------------------------------------------------

namespace {

FineMetricField flat_fine(int n, int m) {
    return {n, m, DomainMask::full(n * m), std::vector<double>(vertex_count(n * m), 0.0)};
}

}  // namespace

TEST(FineLfpp, FlatAxisAndDiagonal) {
    const auto f = flat_fine(8, 3);
    for (int k = 1; k <= 6; ++k) {
        EXPECT_NEAR(fine_lfpp_distance(f, {0, 0}, {double(k), 0}, 0.4).distance, k, 1e-12);
        EXPECT_NEAR(fine_lfpp_distance(f, {0, 0}, {double(k), double(k)}, 0.4).distance, std::sqrt(2.0) * k, 1e-12);
    }
    EXPECT_EQ(fine_lfpp_distance(f, {1.0, 1.0}, {1.1, 0.9}, 0.4).distance, 0.0);
}

TEST(FineLfpp, SnapsEndpointsToNearestFineVertex) {
    EXPECT_EQ(snap_to_fine({0.5, 1.0}, 4), (LatticePoint{2, 4}));
    EXPECT_EQ(snap_to_fine({0.125, 0.375}, 4), (LatticePoint{0, 1}));  // ties toward the smaller value
    const auto f = flat_fine(4, 4);
    EXPECT_NEAR(fine_lfpp_distance(f, {0.3, 0.0}, {1.0, 0.0}, 0.4).distance, 0.75, 1e-12);
}

TEST(FineLfpp, FivePatchMatchesEnumeration) {
    // 5x5 fine vertices: coarse scale 2, m = 2.
    auto f = flat_fine(2, 2);
    f.h[vertex_index(4, 2, 2)] = 2.0;
    f.h[vertex_index(4, 1, 3)] = -1.5;
    for (double xi : {0.4, 1.0, 2.0}) {
        for (auto [a, b] : std::vector<std::pair<RealPoint, RealPoint>>{
                 {{0, 0}, {2, 2}}, {{0, 2}, {2, 0}}, {{0, 1}, {2, 1}}, {{0.5, 0}, {1, 2}}}) {
            const auto r = fine_lfpp_distance(f, a, b, xi, true);
            const double oracle = fine_enumerate(f, xi, snap_to_fine(a, 2), snap_to_fine(b, 2));
            EXPECT_NEAR(r.distance, oracle, 1e-12 * oracle);
            ASSERT_TRUE(r.geodesic);
            EXPECT_NEAR(fine_path_cost(f, xi, *r.geodesic), r.distance, 1e-12 * r.distance);
        }
    }
}

TEST(FineLfpp, RandomInstancesMatchBellmanFord) {
    std::mt19937_64 gen(21);
    for (int inst = 0; inst < 200; ++inst) {
        const int n = 2 + inst % 3;
        const int mm = 1 + inst % (8 / n);  // fine scale n*mm <= 8
        FineMetricField f{n, mm, random_mask(n * mm, gen, 0.85), gaussian_values(n * mm, gen)};
        const auto a = random_point(n * mm, gen), b = random_point(n * mm, gen);
        f.mask.set(a.x, a.y);
        f.mask.set(b.x, b.y);
        const RealPoint za{double(a.x) / mm, double(a.y) / mm}, zb{double(b.x) / mm, double(b.y) / mm};
        const double xi = 0.7;
        const auto r = fine_lfpp_distance(f, za, zb, xi, true);
        const double oracle = fine_bellman_ford(f, xi, a, b);
        if (std::isinf(oracle)) {
            EXPECT_FALSE(r.reachable());
            continue;
        }
        EXPECT_NEAR(r.distance, oracle, 1e-12 * std::max(oracle, 1.0));
        ASSERT_TRUE(r.geodesic);
        for (std::size_t k = 1; k < r.geodesic->size(); ++k) {
            const auto p = (*r.geodesic)[k - 1], q = (*r.geodesic)[k];
            EXPECT_LE(std::max(std::abs(p.x - q.x), std::abs(p.y - q.y)), 1);
            EXPECT_TRUE(f.mask.contains(q));
        }
        EXPECT_NEAR(fine_path_cost(f, xi, *r.geodesic), r.distance, 1e-12 * std::max(r.distance, 1.0));
    }
}

TEST(FineLfpp, DiagonalMayNotCutAMaskCorner) {
    auto f = flat_fine(2, 1);
    f.mask = DomainMask(2, false);
    for (auto p : {LatticePoint{0, 0}, LatticePoint{1, 0}, LatticePoint{1, 1}}) f.mask.set(p.x, p.y);
    // (0,0)->(1,1) diagonal is blocked because (0,1) is outside: go around.
    EXPECT_NEAR(fine_lfpp_distance(f, {0, 0}, {1, 1}, 0.4).distance, 2.0, 1e-12);
}

TEST(FineLfpp, CouplingOverloadRaisesNearBoundary) {
    const auto c = build_coupling(12, 2, 5);
    EXPECT_THROW(fine_lfpp_distance(c, {3, 3}, {6, 6}, RectRegion::unit_square(), 0.4), BoundaryProximity);
    const auto r = fine_lfpp_distance(c, {3, 3}, {6, 6}, RectRegion::center_half_square(), 0.4, true);
    EXPECT_TRUE(r.reachable());
    EXPECT_GT(r.distance, 0.0);
}

// ---------------------------------------------------------------------------

namespace {

CouplingSample flat_coupling(int n, int m) {
    CouplingSample c;
    c.n = n;
    c.m = m;
    c.coarse = FieldSample(n, 1, FieldKind::CoarseDGFF, 0);
    c.fine = FieldSample(n * m, m, FieldKind::CoupledFine, 0);
    refresh_circle_averages(c);
    return c;
}

}  // namespace

TEST(CompareMetrics, FlatFieldClosedForm) {
    const int n = 16;
    const auto c = flat_coupling(n, 2);
    const MetricComparator cmp(c, RectRegion::center_half_square(), 0.4);
    for (int k = 1; k <= 6; ++k) {
        const auto p = cmp.compare({5, 8}, {5.0 + k, 8});
        EXPECT_DOUBLE_EQ(p.dlfpp, k + 1.0);
        EXPECT_DOUBLE_EQ(p.correction, 1.0);
        EXPECT_NEAR(p.fine, k, 1e-12);
        EXPECT_NEAR(p.r, std::abs(std::log(k + 2.0) - std::log(double(k))) / std::log(double(n)), 1e-12);
    }
}

TEST(CompareMetrics, SameCoarseVertexDistinctPoints) {
    const int n = 16;
    const auto c = flat_coupling(n, 4);
    const MetricComparator cmp(c, RectRegion::center_half_square(), 0.4);
    const auto p = cmp.compare({8.0, 8.0}, {8.25, 8.25});
    EXPECT_EQ(p.dlfpp, 0.0);
    EXPECT_DOUBLE_EQ(p.correction, 1.0);
    EXPECT_NEAR(p.fine, std::sqrt(2.0) * 0.25, 1e-12);
    EXPECT_TRUE(std::isfinite(p.r));
}

TEST(CompareMetrics, DeterministicAndRequiresInteriorRegion) {
    const auto c = build_coupling(16, 2, 99);
    const auto a = compare_metrics(c, RectRegion::center_half_square(), 5, 0.4, 3, 1);
    const auto b = compare_metrics(c, RectRegion::center_half_square(), 5, 0.4, 3, 2);
    ASSERT_EQ(a.pairs.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.pairs[i].r, b.pairs[i].r);
    EXPECT_EQ(a.median, b.median);
    EXPECT_GE(a.max, a.median);
    EXPECT_THROW(compare_metrics(c, RectRegion::unit_square(), 5, 0.4, 3), InvalidArgument);
}
