#ifndef LFPP_ANALYSIS_HPP
#define LFPP_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <gsl/gsl_fit.h>
#include <json.hpp>

#include "coupling.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "gff.hpp"
#include "lattice.hpp"
#include "metric.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace lfpp {

inline constexpr double kDefaultChi = 0.75;

// ---------------------------------------------------------------------------
// Level-set crossings

struct LevelSetQuery {
    double threshold = std::numeric_limits<double>::infinity();
    std::optional<double> chi;  ///< set when threshold = (log n)^chi
    AnnulusSpec annulus;

    /// t = (log n)^chi with chi in (1/2, 1).
    static LevelSetQuery from_chi(int n, double chi = kDefaultChi) {
        if (!(chi > 0.5 && chi < 1.0)) throw InvalidArgument("chi must lie in (1/2, 1)");
        return {std::pow(std::log(static_cast<double>(n)), chi), chi, lfpp::annulus(n)};
    }

    static LevelSetQuery with_threshold(int n, double t) { return {t, std::nullopt, lfpp::annulus(n)}; }
};

struct CrossingResult {
    bool found = false;
    std::optional<std::vector<LatticePoint>> path;
    std::int64_t hop_count = 0;  ///< vertices on the crossing path (0 when not found)
};

/// Minimum-hop path inside {v : field(v) <= t} from [nS1] to [n dS2], by
/// breadth-first search from every admissible inner vertex at once.
inline CrossingResult levelset_crossing(const FieldSample& field, const LevelSetQuery& q) {
    const int n = field.n;
    if (q.annulus.n != n) throw InvalidArgument("annulus built for a different n");
    if (q.chi && !(*q.chi > 0.5 && *q.chi < 1.0)) throw InvalidArgument("chi must lie in (1/2, 1)");
    const std::size_t count = vertex_count(n);
    auto open = [&](std::size_t i) { return field.values[i] <= q.threshold; };

    std::vector<std::int32_t> parent(count, -2);  // -2: unvisited, -1: root
    std::queue<std::uint32_t> frontier;
    for (const auto& p : q.annulus.inner.points()) {
        const auto i = vertex_index(n, p.x, p.y);
        if (open(i)) {
            parent[i] = -1;
            frontier.push(static_cast<std::uint32_t>(i));
        }
    }
    const int stride = n + 1;
    while (!frontier.empty()) {
        const auto i = frontier.front();
        frontier.pop();
        if (q.annulus.outer_boundary.test(i)) {
            CrossingResult r;
            r.found = true;
            r.path = detail::trace_path(n, parent, i);
            r.hop_count = static_cast<std::int64_t>(r.path->size());
            return r;
        }
        const int x = static_cast<int>(i % stride), y = static_cast<int>(i / stride);
        const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
        for (const auto& p : nb) {
            if (p[0] < 0 || p[1] < 0 || p[0] > n || p[1] > n) continue;
            const auto j = vertex_index(n, p[0], p[1]);
            if (parent[j] != -2 || !open(j)) continue;
            parent[j] = static_cast<std::int32_t>(i);
            frontier.push(static_cast<std::uint32_t>(j));
        }
    }
    return {};
}

/// hop_count * exp(xi sqrt(pi/2) t): every vertex on the crossing path has
/// weight at most exp(xi sqrt(pi/2) t), so this bounds the DLFPP annulus distance.
inline double levelset_cost_bound(const CrossingResult& r, double xi, double t) {
    if (!r.found) throw InvalidArgument("levelset_cost_bound needs a found crossing");
    if (xi < 0.0) throw InvalidArgument("xi must be nonnegative");
    return static_cast<double>(r.hop_count) * std::exp(xi * kSqrtHalfPi * t);
}

/// DLFPP distance from [nS1] to [n dS2] on the full grid.
inline DistanceResult annulus_distance(const FieldSample& field, double xi, const AnnulusSpec& a,
                                       bool want_geodesic = false) {
    if (a.n != field.n) throw InvalidArgument("annulus built for a different n");
    return dlfpp_distance(field, DistanceQuery{a.inner.points(), a.outer_boundary.points(), DomainMask::full(field.n),
                                               MetricKind::DLFPP, xi, want_geodesic});
}

// ---------------------------------------------------------------------------
// Exponent estimation

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double residual_ss = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit needs at least two points");
    LinearFit f;
    double cov00 = 0, cov01 = 0, cov11 = 0;
    gsl_fit_linear(x.data(), 1, y.data(), 1, x.size(), &f.intercept, &f.slope, &cov00, &cov01, &cov11, &f.residual_ss);
    f.slope_stderr = x.size() > 2 ? std::sqrt(cov11) : 0.0;
    return f;
}

struct ImpliedDGamma {
    double gamma = 0.0;
    double dgamma = 0.0;
    bool bound_check = false;  ///< d_gamma >= 2 + gamma^2/2 - slack
};

/// Inverts xi = gamma/d_gamma and Q = 2/d_gamma + gamma^2/(2 d_gamma): the
/// smaller root of (xi/2) gamma^2 - Q gamma + 2 xi = 0. Empty if Q^2 < 4 xi^2.
inline std::optional<ImpliedDGamma> implied_dgamma(double xi, double q, double slack = 0.0) {
    if (!(xi > 0.0) || !(q > 0.0)) throw InvalidArgument("implied_dgamma needs xi > 0 and Q > 0");
    const double disc = q * q - 4.0 * xi * xi;
    if (disc < 0.0) return std::nullopt;
    ImpliedDGamma r;
    r.gamma = 4.0 * xi / (q + std::sqrt(disc));  // cancellation-free form of (Q - sqrt(disc))/xi
    r.dgamma = r.gamma / xi;
    r.bound_check = r.dgamma >= 2.0 + r.gamma * r.gamma / 2.0 - slack;
    return r;
}

/// One replicate of an exponent run.
struct ExponentSample {
    double xi = 0.0;
    int n = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    double distance = 0.0;
    std::int64_t hop_count = 0;  ///< vertices on the DLFPP geodesic
    bool crossing_found = false;  ///< level-set crossing at t = (log n)^chi
};

struct ExponentEstimate {
    double xi = 0.0;
    std::vector<int> ladder;
    std::vector<double> median_log_distance;
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    std::optional<ImpliedDGamma> implied;
    std::vector<ExponentSample> samples;

    double lambda_hat() const noexcept { return 1.0 - slope; }
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw InvalidArgument("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

inline void check_ladder(std::span<const int> ladder) {
    if (ladder.size() < 3) throw InvalidArgument("ladder needs at least three sizes");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (ladder[i] <= ladder[i - 1]) throw InvalidArgument("ladder must be strictly increasing");
    for (int n : ladder) {
        if (n < 12) throw InvalidArgument("ladder sizes must be >= 12");
        check_budget(n, 1);
    }
}

/// Replicate seed for (n, rep).
inline std::uint64_t replicate_seed(std::uint64_t seed, int n, int rep) { return derive_seed(seed, n, rep); }

/// Fits median log D against log n from already collected samples.
inline ExponentEstimate summarize_exponent(double xi, std::span<const int> ladder, std::vector<ExponentSample> samples) {
    ExponentEstimate est;
    est.xi = xi;
    est.ladder.assign(ladder.begin(), ladder.end());
    std::vector<double> logn;
    for (int n : ladder) {
        std::vector<double> logs;
        for (const auto& s : samples)
            if (s.n == n) logs.push_back(std::log(s.distance));
        est.median_log_distance.push_back(median_of(std::move(logs)));
        logn.push_back(std::log(static_cast<double>(n)));
    }
    const auto fit = fit_line(logn, est.median_log_distance);
    if (!std::isfinite(fit.slope)) throw Error("exponent fit produced a non-finite slope");
    est.slope = fit.slope;
    est.intercept = fit.intercept;
    est.slope_stderr = fit.slope_stderr;
    if (xi > 0.0 && est.slope > 0.0) est.implied = implied_dgamma(xi, est.slope);
    est.samples = std::move(samples);
    return est;
}

/// Distance oracle hook: returns D for (n, rep, seed). Used to inject exact
/// power laws into the regression.
using DistanceOracle = std::function<double(int n, int rep, std::uint64_t seed)>;

inline ExponentEstimate estimate_exponent(double xi, std::span<const int> ladder, int reps, std::uint64_t seed,
                                          const DistanceOracle& oracle) {
    if (ladder.size() < 3) throw InvalidArgument("ladder needs at least three sizes");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (ladder[i] <= ladder[i - 1]) throw InvalidArgument("ladder must be strictly increasing");
    if (reps < 1) throw InvalidArgument("reps must be positive");
    std::vector<ExponentSample> samples;
    for (int n : ladder) {
        for (int r = 0; r < reps; ++r) {
            ExponentSample s{xi, n, r, replicate_seed(seed, n, r)};
            s.distance = oracle(n, r, s.seed);
            samples.push_back(s);
        }
    }
    return summarize_exponent(xi, ladder, std::move(samples));
}

/// One Monte Carlo replicate: sample the DGFF, measure the annulus distance
/// and the level-set crossing.
inline ExponentSample exponent_replicate(double xi, int n, int rep, std::uint64_t seed, double chi = kDefaultChi) {
    ExponentSample s{xi, n, rep, replicate_seed(seed, n, rep)};
    const auto field = sample_dgff(n, s.seed);
    const auto q = LevelSetQuery::from_chi(n, chi);
    const auto d = annulus_distance(field, xi, q.annulus, true);
    if (!d.reachable()) throw Error("annulus unexpectedly disconnected");
    s.distance = d.distance;
    s.hop_count = static_cast<std::int64_t>(d.geodesic->size());
    s.crossing_found = levelset_crossing(field, q).found;
    return s;
}

inline ExponentEstimate estimate_exponent(double xi, std::span<const int> ladder, int reps, std::uint64_t seed,
                                          unsigned jobs = default_jobs()) {
    if (!(xi > 0.0)) throw InvalidArgument("xi must be positive");
    check_ladder(ladder);
    if (reps < 5) throw InvalidArgument("reps must be >= 5");
    std::vector<ExponentSample> samples(ladder.size() * static_cast<std::size_t>(reps));
    parallel_for(samples.size(), jobs, [&](std::size_t i) {
        const int n = ladder[i / reps];
        const int r = static_cast<int>(i % reps);
        samples[i] = exponent_replicate(xi, n, r, seed);
    });
    return summarize_exponent(xi, ladder, std::move(samples));
}

struct LambdaCheck {
    ExponentEstimate estimate;
    double tolerance = 0.1;
    bool passed = false;  ///< slope <= 1 + tolerance
};

inline LambdaCheck lambda_nonneg_check(const ExponentEstimate& est, double tolerance = 0.1) {
    return {est, tolerance, est.slope <= 1.0 + tolerance};
}

inline LambdaCheck lambda_nonneg_check(double xi, std::span<const int> ladder, int reps, std::uint64_t seed,
                                       double tolerance = 0.1, unsigned jobs = default_jobs()) {
    return lambda_nonneg_check(estimate_exponent(xi, ladder, reps, seed, jobs), tolerance);
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr const char* kExperimentCsvHeader = "xi,n,rep,seed,distance,hop_count,crossing_found";

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline void write_experiment_csv(std::ostream& out, std::span<const ExponentSample> samples) {
    out << kExperimentCsvHeader << '\n';
    for (const auto& s : samples) {
        out << format_double(s.xi) << ',' << s.n << ',' << s.rep << ',' << s.seed << ',' << format_double(s.distance)
            << ',' << s.hop_count << ',' << (s.crossing_found ? "true" : "false") << '\n';
    }
}

inline std::vector<ExponentSample> read_experiment_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kExperimentCsvHeader) throw FormatError("experiment CSV header mismatch");
    std::vector<ExponentSample> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 7) throw FormatError("experiment CSV row needs 7 columns: " + line);
        try {
            ExponentSample s;
            s.xi = std::stod(f[0]);
            s.n = std::stoi(f[1]);
            s.rep = std::stoi(f[2]);
            s.seed = std::stoull(f[3]);
            s.distance = std::stod(f[4]);
            s.hop_count = std::stoll(f[5]);
            if (f[6] != "true" && f[6] != "false") throw FormatError("bad crossing_found value");
            s.crossing_found = f[6] == "true";
            out.push_back(s);
        } catch (const std::logic_error&) {
            throw FormatError("malformed experiment CSV row: " + line);
        }
    }
    return out;
}

/// {slope, stderr, lambda_hat, gamma_hat, dgamma_hat, bound_check}; the last
/// three are null when the implied pair does not exist.
inline nlohmann::ordered_json experiment_summary_json(const ExponentEstimate& est) {
    nlohmann::ordered_json j;
    j["xi"] = est.xi;
    j["ladder"] = est.ladder;
    j["median_log_distance"] = est.median_log_distance;
    j["slope"] = est.slope;
    j["intercept"] = est.intercept;
    j["stderr"] = est.slope_stderr;
    j["lambda_hat"] = est.lambda_hat();
    if (est.implied) {
        j["gamma_hat"] = est.implied->gamma;
        j["dgamma_hat"] = est.implied->dgamma;
        j["bound_check"] = est.implied->bound_check;
    } else {
        j["gamma_hat"] = nullptr;
        j["dgamma_hat"] = nullptr;
        j["bound_check"] = nullptr;
    }
    return j;
}

}  // namespace lfpp

#endif  // LFPP_ANALYSIS_HPP
