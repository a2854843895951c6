// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lfpp/analysis.hpp"
#include "lfpp/coupling.hpp"
#include "lfpp/gff.hpp"
#include "lfpp/metric.hpp"
#include "oracles.hpp"

using namespace lfpp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const std::vector<int> kLadder{64, 128, 256, 512};

// 1. Empirical DGFF covariance against the exact Green function.
Outcome sampler_law() {
    Outcome out{true, ""};
    {
        const int n = 16, N = 20000;
        const auto c = center_vertex(n);
        double sum2 = 0.0;
        for (int s = 0; s < N; ++s) {
            const double v = sample_dgff(n, derive_seed(1001, s)).at(c);
            sum2 += v * v;
        }
        const double g = GreenOracle(n)(c, c);
        const double se = std::sqrt(2.0 * g * g / N);  // mean known to be zero
        const double z = (sum2 / N - g) / se;
        out.pass = std::abs(z) <= 3.0;
        out.detail = fmt("n=16 var=%.4f green=%.4f z=%.2f", sum2 / N, g, z);
    }
    for (int n : {2, 3, 4, 8}) {
        const int N = 20000;
        const GreenOracle green(n);
        std::vector<LatticePoint> pts;
        for (int y = 1; y < n; ++y)
            for (int x = 1; x < n; ++x) pts.push_back({x, y});
        const std::size_t k = pts.size();
        std::vector<double> acc(k * k, 0.0);
        for (int s = 0; s < N; ++s) {
            const auto f = sample_dgff(n, derive_seed(1002, n, s));
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = i; j < k; ++j) acc[i * k + j] += f.at(pts[i]) * f.at(pts[j]);
        }
        double worst = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i; j < k; ++j) {
                const double gij = green(pts[i], pts[j]);
                const double se = std::sqrt((green(pts[i], pts[i]) * green(pts[j], pts[j]) + gij * gij) / N);
                worst = std::max(worst, std::abs(acc[i * k + j] / N - gij) / se);
            }
        }
        out.pass = out.pass && worst <= 4.0;
        out.detail += fmt("; n=%d max|z|=%.2f", n, worst);
    }
    return out;
}

// 2. Centre Green function minus (2/pi) log n stays bounded.
Outcome log_profile() {
    const std::vector<int> ns{16, 32, 64, 128};
    const auto rows = covariance_log_profile(ns);
    double lo = rows[0].residual, hi = lo;
    std::string d;
    for (const auto& r : rows) {
        lo = std::min(lo, r.residual);
        hi = std::max(hi, r.residual);
        d += fmt("n=%d res=%.4f ", r.n, r.residual);
    }
    return {hi - lo < 0.2, d + fmt("spread=%.4f", hi - lo)};
}

// 3. Circle-average variance grows by log 2 per doubling.
Outcome circle_growth() {
    const std::vector<int> ns{32, 64};
    const auto rows = circle_average_variance_profile(ns, 4, 5000, 3003);
    const double step = rows[1].var_circle - rows[0].var_circle;
    return {std::abs(step - std::numbers::ln2) <= 0.15,
            fmt("var(32)=%.4f var(64)=%.4f step=%.4f target=%.4f", rows[0].var_circle, rows[1].var_circle, step,
                std::numbers::ln2)};
}

// 4. Median discrepancy statistic decreases in n.
Outcome discrepancy_decay() {
    const auto region = RectRegion::center_half_square();
    std::vector<double> med;
    std::string d;
    for (int n : {32, 64, 128}) {
        const ProjectionSolver solver(n, 4);
        std::vector<double> v;
        for (int s = 0; s < 20; ++s)
            v.push_back(discrepancy_stat(build_coupling(n, 4, derive_seed(4004, n, s), CouplingMode::ExactCoarse, solver),
                                         region));
        med.push_back(median_of(v));
        d += fmt("n=%d median=%.4f ", n, med.back());
    }
    const bool pass = med[0] > med[1] && med[1] > med[2] && med[2] < 0.6;
    return {pass, d};
}

// 5. Discrete and fine-mesh distances agree on the log scale.
Outcome distance_comparability() {
    const auto region = RectRegion::center_half_square();
    std::vector<double> med;
    std::string d;
    for (int n : {32, 64, 128}) {
        const auto c = build_coupling(n, 4, derive_seed(5005, n));
        med.push_back(compare_metrics(c, region, 30, 0.4, derive_seed(5006, n)).median);
        d += fmt("n=%d median_r=%.4f ", n, med.back());
    }
    return {med[0] > med[1] && med[1] > med[2] && med[2] < 0.25, d};
}

// 6. Annulus slopes do not exceed 1 (+0.1).
Outcome slope_upper() {
    bool pass = true;
    std::string d;
    for (double xi : {0.2, 0.4, 0.8}) {
        const auto est = estimate_exponent(xi, kLadder, 10, 6006);
        pass = pass && lambda_nonneg_check(est, 0.1).passed;
        d += fmt("xi=%.1f slope=%.4f ", xi, est.slope);
    }
    return {pass, d};
}

const double kCalibXi = std::sqrt(8.0 / 3.0) / 4.0;

// 40 replicates per size: at 10 the fitted slope has sd ~0.1 across seeds,
// comparable to the whole tolerance band.
const ExponentEstimate& calibration_estimate() {
    static const ExponentEstimate est = estimate_exponent(kCalibXi, kLadder, 40, 7007);
    return est;
}

// 7. Slope near 5/6 at the calibration xi; exact inversion at (xi, 5/6).
Outcome calibration() {
    const auto& est = calibration_estimate();
    const auto inv = implied_dgamma(kCalibXi, 5.0 / 6.0);
    const bool inv_ok = inv && std::abs(inv->gamma - std::sqrt(8.0 / 3.0)) <= 1e-10 && std::abs(inv->dgamma - 4.0) <= 1e-10;
    const bool slope_ok = est.slope >= 0.70 && est.slope <= 0.95;
    return {inv_ok && slope_ok, fmt("slope=%.4f (target %.4f) gamma_err=%.2e dgamma_err=%.2e", est.slope, 5.0 / 6.0,
                                    inv ? std::abs(inv->gamma - std::sqrt(8.0 / 3.0)) : NAN,
                                    inv ? std::abs(inv->dgamma - 4.0) : NAN)};
}

// 8. Implied dimension satisfies the KPZ-type lower bound up to slack.
Outcome bound_consistency() {
    const auto& est = calibration_estimate();
    const auto inv = implied_dgamma(kCalibXi, est.slope, 0.3);
    if (!inv) return {false, fmt("slope=%.4f admits no implied (gamma, d_gamma)", est.slope)};
    return {inv->bound_check, fmt("slope=%.4f gamma=%.4f d_gamma=%.4f 2+gamma^2/2-0.3=%.4f", est.slope, inv->gamma,
                                  inv->dgamma, 2.0 + inv->gamma * inv->gamma / 2.0 - 0.3)};
}

// 9. Level-set crossings exist and bound the annulus distance.
Outcome levelset() {
    bool pass = true;
    std::string d;
    const double xi = 0.4;
    for (int n : kLadder) {
        const auto q = LevelSetQuery::from_chi(n, 0.75);
        const double hop_cap = n * std::exp(std::pow(std::log(double(n)), 0.75));
        int found = 0;
        for (int s = 0; s < 20; ++s) {
            const auto f = sample_dgff(n, derive_seed(9009, n, s));
            const auto r = levelset_crossing(f, q);
            if (!r.found) continue;
            ++found;
            if (r.hop_count > hop_cap) pass = false;
            if (levelset_cost_bound(r, xi, q.threshold) < annulus_distance(f, xi, q.annulus).distance) pass = false;
        }
        if (found < 18) pass = false;
        d += fmt("n=%d found=%d/20 ", n, found);
    }
    return {pass, d};
}

// 10. Engines against brute force; projection against the dense oracle.
Outcome oracle_equivalence() {
    std::mt19937_64 gen(10010);
    std::normal_distribution<double> g;
    auto random_mask = [&](int n, double keep) {
        std::bernoulli_distribution b(keep);
        DomainMask mask(n, false);
        for (int y = 0; y <= n; ++y)
            for (int x = 0; x <= n; ++x)
                if (b(gen)) mask.set(x, y);
        return mask;
    };
    auto random_point = [&](int n) {
        std::uniform_int_distribution<int> u(0, n);
        return LatticePoint{u(gen), u(gen)};
    };
    auto close = [](double a, double b) {
        if (std::isinf(a) || std::isinf(b)) return a == b;
        return std::abs(a - b) <= 1e-10 * std::max(1.0, b);
    };
    int mismatches = 0;
    const int instances = 200;
    for (int inst = 0; inst < instances; ++inst) {
        const int n = 2 + inst % 7;  // 2..8
        const double xi = 0.2 + 0.1 * (inst % 7);
        // Vertex metrics: DLFPP on the field, lattice LFPP on a circle-average stand-in.
        FieldSample f(n, 1, FieldKind::CoarseDGFF, 0);
        for (auto& v : f.values) v = g(gen);
        auto mask = random_mask(n, 0.75);
        const auto u = random_point(n), v = random_point(n);
        mask.set(u.x, u.y);
        mask.set(v.x, v.y);
        const DistanceQuery dq{{u}, {v}, mask, MetricKind::DLFPP, xi, false};
        const double d1 = dlfpp_distance(f, dq).distance;
        const double o1 = oracle::enumerate_vertex_paths(n, exponential_weights(f, xi, kSqrtHalfPi), mask, u, v);
        DistanceQuery lq = dq;
        lq.kind = MetricKind::LatticeLFPP;
        const double d2 = lattice_lfpp_distance(f, lq).distance;
        const double o2 = oracle::enumerate_vertex_paths(n, exponential_weights(f, xi, 1.0), mask, u, v);
        if (!close(d1, o1) || !close(d2, o2)) ++mismatches;
        // Fine mesh: coarse scale c, refinement mm with c*mm <= 8.
        const int c = 2 + inst % 3;
        const int mm = 1 + inst % (8 / c);
        const int N = c * mm;
        FineMetricField fm{c, mm, random_mask(N, 0.8), std::vector<double>(vertex_count(N))};
        for (auto& h : fm.h) h = g(gen);
        const auto a = random_point(N), b = random_point(N);
        fm.mask.set(a.x, a.y);
        fm.mask.set(b.x, b.y);
        const double d3 = fine_lfpp_distance(fm, {double(a.x) / mm, double(a.y) / mm},
                                             {double(b.x) / mm, double(b.y) / mm}, xi)
                              .distance;
        if (!close(d3, oracle::fine_enumerate(fm, xi, a, b))) ++mismatches;
    }
    double worst = 0.0;
    for (auto [n, m] : {std::pair{4, 2}, std::pair{8, 2}}) {
        const auto fine = sample_dgff(n * m, derive_seed(10011, n), FieldKind::FineDGFF, m, kStreamFine);
        const auto got = ProjectionSolver(n, m).project(fine.values).coarse;
        const auto want = oracle::dense_projection(fine.values, n, m);
        for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    }
    return {mismatches == 0 && worst <= 1e-8,
            fmt("%d/%d instances x 3 engines mismatched; projection max diff=%.2e", mismatches, instances, worst)};
}

// 11. Determinism and timing.
Outcome determinism_and_timing() {
    bool pass = true;
    std::string d;
    pass = pass && encode_snapshot(sample_dgff(128, 11)) == encode_snapshot(sample_dgff(128, 11));
    {
        const auto a = build_coupling(32, 4, 12), b = build_coupling(32, 4, 12);
        pass = pass && encode_snapshot(a.coarse) == encode_snapshot(b.coarse) &&
               encode_snapshot(a.fine) == encode_snapshot(b.fine) && encode_snapshot(a.circ) == encode_snapshot(b.circ);
    }
    auto report = [] {
        const std::vector<int> ladder{16, 32, 64};
        const auto est = estimate_exponent(0.4, ladder, 5, 13);
        std::ostringstream os;
        write_experiment_csv(os, est.samples);
        os << experiment_summary_json(est).dump(2);
        return os.str();
    };
    pass = pass && report() == report();
    d += pass ? "snapshots/bundles/reports identical; " : "NONDETERMINISTIC output; ";

    auto t0 = Clock::now();
    const auto f = sample_dgff(512, 14);
    const auto dist = annulus_distance(f, 0.4, annulus(512));
    const double t_sample = seconds_since(t0);
    t0 = Clock::now();
    const auto c = build_coupling(128, 4, 15);
    const double t_couple = seconds_since(t0);
    pass = pass && dist.reachable() && t_sample < 10.0 && t_couple < 60.0;
    d += fmt("n=512 sample+annulus=%.2fs; n=128 m=4 coupling=%.2fs", t_sample, t_couple);
    (void)c;
    return {pass, d};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"sampler law", sampler_law},
        {"centre variance minus (2/pi) log n bounded", log_profile},
        {"circle-average variance grows by log 2 per doubling", circle_growth},
        {"coarse/circle-average discrepancy decays", discrepancy_decay},
        {"DLFPP vs fine LFPP distance comparability", distance_comparability},
        {"annulus slope <= 1.1", slope_upper},
        {"calibration slope and exact inversion", calibration},
        {"implied d_gamma bound check", bound_consistency},
        {"level-set crossing", levelset},
        {"oracle equivalence", oracle_equivalence},
        {"determinism and performance", determinism_and_timing},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("[%s] C%d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
