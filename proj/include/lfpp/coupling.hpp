#ifndef LFPP_COUPLING_HPP
#define LFPP_COUPLING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "errors.hpp"
#include "field.hpp"
#include "gff.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace lfpp {

inline constexpr int kDefaultBudgetNm = 4096;

/// Budget on the fine scale n*m. LFPP_BUDGET_NM overrides the default.
inline int budget_nm() {
    if (const char* env = std::getenv("LFPP_BUDGET_NM"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v > 0) return static_cast<int>(v);
        throw InvalidArgument("LFPP_BUDGET_NM must be a positive integer");
    }
    return kDefaultBudgetNm;
}

inline void check_budget(int n, int m) {
    const long long nm = static_cast<long long>(n) * m;
    if (nm > budget_nm()) {
        throw BudgetExceeded("fine scale n*m = " + std::to_string(nm) + " exceeds budget " + std::to_string(budget_nm()) +
                             " (set LFPP_BUDGET_NM to raise it)");
    }
}

// ---------------------------------------------------------------------------
// Piecewise-affine space on the coarse triangulation.
//
// Each unit coarse square is cut along the diagonal from its top-left to its
// bottom-right corner. Fine vertices sit at (1/m)Z^2, i.e. integer fine
// coordinates X = m*x.

/// Hat function of a coarse node evaluated at fine offset (dx, dy) from it,
/// offsets in fine units.
constexpr double hat_value(int m, int dx, int dy) noexcept {
    int extent = 0;
    if ((dx >= 0 && dy >= 0) || (dx <= 0 && dy <= 0)) {
        extent = std::abs(dx) + std::abs(dy);
    } else {
        extent = std::max(std::abs(dx), std::abs(dy));
    }
    return extent >= m ? 0.0 : static_cast<double>(m - extent) / m;
}

/// Visits (coarse corner, weight) for the (up to four) coarse nodes whose hat
/// is nonzero at fine vertex (X, Y).
template <typename Visit>
void for_each_affine_weight(int n, int m, int X, int Y, Visit&& visit) {
    const int i = std::min(X / m, n - 1);
    const int j = std::min(Y / m, n - 1);
    for (int cy = j; cy <= j + 1; ++cy) {
        for (int cx = i; cx <= i + 1; ++cx) {
            const double w = hat_value(m, X - cx * m, Y - cy * m);
            if (w != 0.0) visit(cx, cy, w);
        }
    }
}

/// Piecewise-affine interpolation of coarse vertex values onto the fine lattice.
inline std::vector<double> interpolate(std::span<const double> coarse, int n, int m) {
    const int fine_n = n * m;
    std::vector<double> fine(vertex_count(fine_n), 0.0);
    for (int Y = 0; Y <= fine_n; ++Y) {
        for (int X = 0; X <= fine_n; ++X) {
            double v = 0.0;
            for_each_affine_weight(n, m, X, Y, [&](int cx, int cy, double w) { v += w * coarse[vertex_index(n, cx, cy)]; });
            fine[vertex_index(fine_n, X, Y)] = v;
        }
    }
    return fine;
}

/// Adjoint of `interpolate` with respect to the plain dot products.
inline std::vector<double> interpolate_adjoint(std::span<const double> fine, int n, int m) {
    const int fine_n = n * m;
    std::vector<double> coarse(vertex_count(n), 0.0);
    for (int Y = 0; Y <= fine_n; ++Y) {
        for (int X = 0; X <= fine_n; ++X) {
            const double f = fine[vertex_index(fine_n, X, Y)];
            if (f == 0.0) continue;
            for_each_affine_weight(n, m, X, Y, [&](int cx, int cy, double w) { coarse[vertex_index(n, cx, cy)] += w * f; });
        }
    }
    return coarse;
}

/// Dirichlet Laplacian applied on interior vertices of {0..N}^2 (degree 4);
/// boundary entries of the result are zero.
inline std::vector<double> apply_dirichlet_laplacian(std::span<const double> x, int N) {
    std::vector<double> out(vertex_count(N), 0.0);
    for (int y = 1; y < N; ++y) {
        for (int xx = 1; xx < N; ++xx) {
            const std::size_t i = vertex_index(N, xx, y);
            out[i] = 4.0 * x[i] - x[i - 1] - x[i + 1] - x[i - (N + 1)] - x[i + (N + 1)];
        }
    }
    return out;
}

/// Sum over nearest-neighbour edges of squared differences.
inline double dirichlet_energy(std::span<const double> x, int N) {
    double e = 0.0;
    for (int y = 0; y <= N; ++y) {
        for (int xx = 0; xx <= N; ++xx) {
            const std::size_t i = vertex_index(N, xx, y);
            if (xx < N) e += (x[i + 1] - x[i]) * (x[i + 1] - x[i]);
            if (y < N) e += (x[i + N + 1] - x[i]) * (x[i + N + 1] - x[i]);
        }
    }
    return e;
}

/// Dirichlet-orthogonal projection of fine-lattice fields onto the coarse
/// piecewise-affine space. The stiffness matrix of the coarse hats under the
/// fine-lattice energy is assembled once per (n, m) and shared read-only.
class ProjectionSolver {
public:
    static constexpr double kDefaultTolerance = 1e-12;

    enum class Method {
        SparseCholesky,     ///< factorize once, two triangular solves per projection
        ConjugateGradient,  ///< Jacobi-preconditioned CG with an iteration cap
    };

    ProjectionSolver(int n, int m, double tolerance = kDefaultTolerance, Method method = Method::SparseCholesky,
                     int max_iterations = 0)
        : n_(n), m_(m), tolerance_(tolerance), method_(method) {
        if (n < 2) throw InvalidArgument("projection needs coarse n >= 2");
        if (m < 1) throw InvalidArgument("mesh refinement m must be positive");
        check_budget(n, m);
        max_iterations_ = max_iterations > 0 ? max_iterations : std::max(2000, 40 * n);
        assemble();
        if (method_ == Method::SparseCholesky) {
            cholesky_.compute(stiffness_);
            if (cholesky_.info() != Eigen::Success) throw Error("projection stiffness factorization failed");
        }
    }

    Method method() const noexcept { return method_; }

    int n() const noexcept { return n_; }
    int m() const noexcept { return m_; }
    double tolerance() const noexcept { return tolerance_; }
    const Eigen::SparseMatrix<double>& stiffness() const noexcept { return stiffness_; }

    struct Solution {
        std::vector<double> coarse;  ///< (n+1)^2 values, zero on the boundary
        int iterations = 0;
        double relative_residual = 0.0;
    };

    /// Coarse values of argmin_p E_fine(fine - interp(p)).
    Solution project(std::span<const double> fine) const {
        const int fine_n = n_ * m_;
        if (fine.size() != vertex_count(fine_n)) throw InvalidArgument("fine field does not have scale n*m");
        const auto rhs_full = interpolate_adjoint(apply_dirichlet_laplacian(fine, fine_n), n_, m_);
        const int side = n_ - 1;
        Eigen::VectorXd rhs(side * side);
        for (int y = 1; y < n_; ++y)
            for (int x = 1; x < n_; ++x) rhs[dof(x, y)] = rhs_full[vertex_index(n_, x, y)];
        Solution out;
        out.coarse.assign(vertex_count(n_), 0.0);
        if (rhs.norm() == 0.0) return out;
        if (method_ == Method::SparseCholesky) {
            const Eigen::VectorXd sol = cholesky_.solve(rhs);
            out.relative_residual = (stiffness_ * sol - rhs).norm() / rhs.norm();
            if (!(out.relative_residual <= tolerance_ * 1e3)) {
                throw SolverDivergence("projection direct solve residual " + std::to_string(out.relative_residual) +
                                       " is not small");
            }
            scatter(sol, out.coarse);
            return out;
        }
        // Eigen's solver keeps per-solve status in mutable members, so each call
        // gets its own instance; setting one up is O(nnz).
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::DiagonalPreconditioner<double>>
            cg;
        cg.setTolerance(tolerance_);
        cg.setMaxIterations(max_iterations_);
        cg.compute(stiffness_);
        const Eigen::VectorXd sol = cg.solve(rhs);
        if (cg.info() != Eigen::Success) {
            throw SolverDivergence("projection CG did not reach tolerance " + std::to_string(tolerance_) + " within " +
                                   std::to_string(max_iterations_) + " iterations (residual " +
                                   std::to_string(cg.error()) + ")");
        }
        out.iterations = static_cast<int>(cg.iterations());
        out.relative_residual = cg.error();
        scatter(sol, out.coarse);
        return out;
    }

private:
    void scatter(const Eigen::VectorXd& sol, std::vector<double>& coarse) const {
        for (int y = 1; y < n_; ++y)
            for (int x = 1; x < n_; ++x) coarse[vertex_index(n_, x, y)] = sol[dof(x, y)];
    }

    int dof(int x, int y) const noexcept { return (y - 1) * (n_ - 1) + (x - 1); }

    void assemble() {
        const int fine_n = n_ * m_;
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(n_ - 1) * (n_ - 1) * 9);
        for (int cy = 1; cy < n_; ++cy) {
            for (int cx = 1; cx < n_; ++cx) {
                for (int oy = -1; oy <= 1; ++oy) {
                    for (int ox = -1; ox <= 1; ++ox) {
                        const int dx = cx + ox, dy = cy + oy;
                        if (dx < 1 || dy < 1 || dx >= n_ || dy >= n_) continue;
                        // Sum over fine edges where both hats can vary.
                        const int x0 = std::max(0, (std::min(cx, dx) - 1) * m_ - 1);
                        const int x1 = std::min(fine_n, (std::max(cx, dx) + 1) * m_);
                        const int y0 = std::max(0, (std::min(cy, dy) - 1) * m_ - 1);
                        const int y1 = std::min(fine_n, (std::max(cy, dy) + 1) * m_);
                        double k = 0.0;
                        for (int Y = y0; Y <= y1; ++Y) {
                            for (int X = x0; X <= x1; ++X) {
                                const double hc = hat_value(m_, X - cx * m_, Y - cy * m_);
                                const double hd = hat_value(m_, X - dx * m_, Y - dy * m_);
                                if (X < x1) {
                                    k += (hat_value(m_, X + 1 - cx * m_, Y - cy * m_) - hc) *
                                         (hat_value(m_, X + 1 - dx * m_, Y - dy * m_) - hd);
                                }
                                if (Y < y1) {
                                    k += (hat_value(m_, X - cx * m_, Y + 1 - cy * m_) - hc) *
                                         (hat_value(m_, X - dx * m_, Y + 1 - dy * m_) - hd);
                                }
                            }
                        }
                        if (k != 0.0) entries.emplace_back(dof(cx, cy), dof(dx, dy), k);
                    }
                }
            }
        }
        stiffness_.resize((n_ - 1) * (n_ - 1), (n_ - 1) * (n_ - 1));
        stiffness_.setFromTriplets(entries.begin(), entries.end());
        stiffness_.makeCompressed();
    }

    int n_;
    int m_;
    double tolerance_;
    Method method_;
    int max_iterations_ = 0;
    Eigen::SparseMatrix<double> stiffness_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> cholesky_;
};

/// Projects a fine field (scale n*m) to the coarse piecewise-affine space.
inline FieldSample project_to_coarse(const FieldSample& fine, const ProjectionSolver& solver) {
    if (fine.n != solver.n() * solver.m()) throw InvalidArgument("fine field scale does not match solver n*m");
    FieldSample out(solver.n(), 1, FieldKind::CoarseDGFF, fine.seed);
    out.values = solver.project(fine.values).coarse;
    return out;
}

// ---------------------------------------------------------------------------
// Circle averages

/// Bilinear interpolation of a field on {0..N}^2 at real fine coordinates;
/// the field is extended by zero outside the square.
inline double bilinear(const FieldSample& f, double X, double Y) {
    const int N = f.n;
    if (X < 0.0 || Y < 0.0 || X > N || Y > N) return 0.0;
    const int i = std::min(static_cast<int>(X), N - 1);
    const int j = std::min(static_cast<int>(Y), N - 1);
    const double s = X - i, t = Y - j;
    return (1 - s) * (1 - t) * f.at(i, j) + s * (1 - t) * f.at(i + 1, j) + (1 - s) * t * f.at(i, j + 1) +
           s * t * f.at(i + 1, j + 1);
}

/// Exact mean of the bilinear interpolant of `fine` (zero outside the square)
/// over the circle of `radius` fine units around (X0, Y0). No sqrt(pi/2).
///
/// The circle is cut at its crossings with the grid lines; on each arc the
/// interpolant is a + b cos + c sin + d cos sin in the angle, integrated in
/// closed form.
inline double raw_circle_mean(const FieldSample& fine, double X0, double Y0, double radius) {
    const int N = fine.n;
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> cuts{0.0, two_pi};
    auto add_cuts = [&](double center) {
        for (int k = static_cast<int>(std::ceil(center - radius)); k <= static_cast<int>(std::floor(center + radius)); ++k) {
            const double c = std::clamp((k - center) / radius, -1.0, 1.0);
            const double a = std::acos(c);
            cuts.push_back(a);
            cuts.push_back(two_pi - a);
        }
    };
    add_cuts(X0);
    const std::size_t x_cut_end = cuts.size();
    add_cuts(Y0);
    // Rotating by pi/2 turns a cos-crossing angle into a sin-crossing angle.
    for (std::size_t i = x_cut_end; i < cuts.size(); ++i) {
        cuts[i] = std::fmod(cuts[i] + 0.5 * std::numbers::pi, two_pi);
    }
    std::sort(cuts.begin(), cuts.end());

    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k], b = cuts[k + 1];
        if (b - a <= 0.0) continue;
        const double mid = 0.5 * (a + b);
        const double mx = X0 + radius * std::cos(mid), my = Y0 + radius * std::sin(mid);
        if (mx < 0.0 || my < 0.0 || mx > N || my > N) continue;
        const int i = std::min(static_cast<int>(mx), N - 1);
        const int j = std::min(static_cast<int>(my), N - 1);
        const double f00 = fine.at(i, j), f10 = fine.at(i + 1, j), f01 = fine.at(i, j + 1), f11 = fine.at(i + 1, j + 1);
        const double B = f10 - f00, C = f01 - f00, D = f00 - f10 - f01 + f11;
        const double p = X0 - i, q = Y0 - j;  // s = p + r cos, t = q + r sin
        const double k0 = f00 + B * p + C * q + D * p * q;
        const double kc = (B + D * q) * radius;
        const double ks = (C + D * p) * radius;
        const double kcs = D * radius * radius;
        const double sa = std::sin(a), sb = std::sin(b);
        total += k0 * (b - a) + kc * (sb - sa) - ks * (std::cos(b) - std::cos(a)) + 0.5 * kcs * (sb * sb - sa * sa);
    }
    return total / two_pi;
}

enum class CouplingMode {
    ExactCoarse,       ///< coarse is an exact DGFF; fine = interp(coarse) + independent remainder
    DirectProjection,  ///< fine is an exact fine DGFF; coarse is its projection
};

inline std::string_view to_string(CouplingMode mode) {
    return mode == CouplingMode::ExactCoarse ? "exact-coarse" : "direct-projection";
}

inline CouplingMode parse_coupling_mode(std::string_view s) {
    if (s == "exact-coarse") return CouplingMode::ExactCoarse;
    if (s == "direct-projection") return CouplingMode::DirectProjection;
    throw InvalidArgument("unknown coupling mode '" + std::string(s) + "'");
}

/// Coupled (coarse DGFF, fine continuum-GFF surrogate) pair.
/// `fine` is in DGFF units: sqrt(pi/2) * fine approximates the continuum field.
/// `circ` holds the sqrt(pi/2)-scaled unit circle averages at coarse vertices
/// (zero on the outer boundary, where they are undefined).
struct CouplingSample {
    int n = 0;
    int m = 0;
    std::uint64_t seed = 0;
    CouplingMode mode = CouplingMode::ExactCoarse;
    FieldSample coarse;
    FieldSample fine;
    FieldSample circ;
};

inline void check_circle_vertex(int n, LatticePoint v) {
    if (v.x < 1 || v.y < 1 || v.x > n - 1 || v.y > n - 1) {
        throw BoundaryProximity("unit circle around (" + std::to_string(v.x) + "," + std::to_string(v.y) +
                                ") leaves the domain");
    }
}

/// sqrt(pi/2) times the unit circle average of the fine field around coarse vertex v.
inline double circle_average(const CouplingSample& c, LatticePoint v) {
    check_circle_vertex(c.n, v);
    return kSqrtHalfPi * raw_circle_mean(c.fine, static_cast<double>(v.x) * c.m, static_cast<double>(v.y) * c.m, c.m);
}

/// Recomputes `circ` from `fine` (after injecting synthetic fields, say).
inline void refresh_circle_averages(CouplingSample& c) {
    c.circ = FieldSample(c.n, c.m, FieldKind::CircleAverage, c.seed);
    for (int y = 1; y < c.n; ++y)
        for (int x = 1; x < c.n; ++x) c.circ.at(x, y) = circle_average(c, {x, y});
}

/// Coarse and fine fields of a coupling; `circ` is left empty. Use when only a
/// few circle averages are needed.
inline CouplingSample build_coupling_fields(int n, int m, std::uint64_t seed, CouplingMode mode,
                                            const ProjectionSolver& solver) {
    if (n < 12) throw InvalidArgument("coupling needs n >= 12, got " + std::to_string(n));
    if (m < 2) throw InvalidArgument("coupling needs m >= 2, got " + std::to_string(m));
    check_budget(n, m);
    if (solver.n() != n || solver.m() != m) throw InvalidArgument("projection solver built for a different (n, m)");

    CouplingSample c;
    c.n = n;
    c.m = m;
    c.seed = seed;
    c.mode = mode;
    FieldSample fine_dgff = sample_dgff(n * m, seed, FieldKind::FineDGFF, m, kStreamFine);
    if (mode == CouplingMode::ExactCoarse) {
        c.coarse = sample_dgff(n, seed, FieldKind::CoarseDGFF, 1, kStreamCoarse);
        const auto projected = solver.project(fine_dgff.values).coarse;
        const auto projected_fine = interpolate(projected, n, m);
        const auto coarse_fine = interpolate(c.coarse.values, n, m);
        c.fine = FieldSample(n * m, m, FieldKind::CoupledFine, seed);
        for (std::size_t i = 0; i < c.fine.values.size(); ++i) {
            c.fine.values[i] = coarse_fine[i] + (fine_dgff.values[i] - projected_fine[i]);
        }
    } else {
        c.coarse = project_to_coarse(fine_dgff, solver);
        c.fine = std::move(fine_dgff);
        c.fine.kind = FieldKind::CoupledFine;
    }
    return c;
}

/// Builds a coupling for coarse scale n and mesh refinement m.
inline CouplingSample build_coupling(int n, int m, std::uint64_t seed, CouplingMode mode,
                                     const ProjectionSolver& solver) {
    CouplingSample c = build_coupling_fields(n, m, seed, mode, solver);
    refresh_circle_averages(c);
    return c;
}

inline CouplingSample build_coupling(int n, int m, std::uint64_t seed, CouplingMode mode = CouplingMode::ExactCoarse) {
    check_budget(n, m);
    const ProjectionSolver solver(n, m);
    return build_coupling(n, m, seed, mode, solver);
}

inline void check_interior_region(const RectRegion& region) {
    if (region.min_boundary_distance() <= 0) {
        throw InvalidArgument("region must have positive distance to the boundary of the unit square");
    }
}

/// max over v in [nU] of |circle average - sqrt(pi/2) coarse|, divided by log n.
inline double discrepancy_stat(const CouplingSample& c, const RectRegion& region) {
    check_interior_region(region);
    const DomainMask mask = rasterize(region, c.n);
    double worst = 0.0;
    for (const auto& v : mask.points()) {
        worst = std::max(worst, std::abs(circle_average(c, v) - kSqrtHalfPi * c.coarse.at(v)));
    }
    return worst / std::log(static_cast<double>(c.n));
}

/// max over v in [nU] of the signed discrepancy (circle average - sqrt(pi/2) coarse).
inline double discrepancy_signed_max(const CouplingSample& c, const RectRegion& region) {
    check_interior_region(region);
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& v : rasterize(region, c.n).points()) {
        worst = std::max(worst, circle_average(c, v) - kSqrtHalfPi * c.coarse.at(v));
    }
    return worst;
}

struct CircleVarianceRow {
    int n = 0;
    std::size_t samples = 0;
    double var_circle = 0.0;          ///< Var of the circle average at the center vertex
    double var_coarse = 0.0;          ///< Var of sqrt(pi/2) * coarse at the center vertex
    double var_difference = 0.0;      ///< Var of their difference
    double circle_residual = 0.0;     ///< var_circle - log n
    double coarse_residual = 0.0;     ///< var_coarse - log n
};

/// Empirical center-vertex variances over `samples` couplings per n.
/// Seeds are derive_seed(seed, n, i) so rows for different n are independent.
inline std::vector<CircleVarianceRow> circle_average_variance_profile(std::span<const int> n_list, int m,
                                                                      std::size_t samples, std::uint64_t seed,
                                                                      CouplingMode mode = CouplingMode::ExactCoarse,
                                                                      unsigned jobs = default_jobs()) {
    std::vector<CircleVarianceRow> rows;
    if (samples == 0) return rows;
    for (int n : n_list) {
        check_budget(n, m);
        const ProjectionSolver solver(n, m);
        const auto center = center_vertex(n);
        std::vector<double> circ(samples), coarse(samples);
        parallel_for(samples, jobs, [&](std::size_t i) {
            const auto c = build_coupling_fields(n, m, derive_seed(seed, n, i), mode, solver);
            circ[i] = circle_average(c, center);
            coarse[i] = kSqrtHalfPi * c.coarse.at(center);
        });
        auto variance = [&](auto&& value) {
            double mean = 0.0;
            for (std::size_t i = 0; i < samples; ++i) mean += value(i);
            mean /= samples;
            double ss = 0.0;
            for (std::size_t i = 0; i < samples; ++i) ss += (value(i) - mean) * (value(i) - mean);
            return samples > 1 ? ss / (samples - 1) : 0.0;
        };
        CircleVarianceRow row;
        row.n = n;
        row.samples = samples;
        row.var_circle = variance([&](std::size_t i) { return circ[i]; });
        row.var_coarse = variance([&](std::size_t i) { return coarse[i]; });
        row.var_difference = variance([&](std::size_t i) { return circ[i] - coarse[i]; });
        const double logn = std::log(static_cast<double>(n));
        row.circle_residual = row.var_circle - logn;
        row.coarse_residual = row.var_coarse - logn;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Bundle persistence: three snapshots plus a JSON sidecar.

inline constexpr const char* kCoarseFile = "coarse.bin";
inline constexpr const char* kFineFile = "fine.bin";
inline constexpr const char* kCircFile = "circ.bin";
inline constexpr const char* kSidecarFile = "coupling.json";

inline void write_coupling_bundle(const std::filesystem::path& dir, const CouplingSample& c, double solver_tolerance) {
    std::filesystem::create_directories(dir);
    write_snapshot((dir / kCoarseFile).string(), c.coarse);
    write_snapshot((dir / kFineFile).string(), c.fine);
    write_snapshot((dir / kCircFile).string(), c.circ);
    const nlohmann::ordered_json sidecar = {{"n", c.n},
                                            {"m", c.m},
                                            {"seed", c.seed},
                                            {"mode", std::string(to_string(c.mode))},
                                            {"solver_tolerance", solver_tolerance}};
    std::ofstream out(dir / kSidecarFile, std::ios::trunc);
    if (!out) throw Error("cannot write coupling sidecar in '" + dir.string() + "'");
    out << sidecar.dump(2) << '\n';
}

inline CouplingSample read_coupling_bundle(const std::filesystem::path& dir) {
    std::ifstream in(dir / kSidecarFile);
    if (!in) throw Error("cannot open coupling sidecar '" + (dir / kSidecarFile).string() + "'");
    nlohmann::json sidecar;
    try {
        in >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad coupling sidecar: ") + e.what());
    }
    CouplingSample c;
    try {
        c.n = sidecar.at("n").get<int>();
        c.m = sidecar.at("m").get<int>();
        c.seed = sidecar.at("seed").get<std::uint64_t>();
        c.mode = parse_coupling_mode(sidecar.at("mode").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad coupling sidecar: ") + e.what());
    }
    c.coarse = read_snapshot((dir / kCoarseFile).string());
    c.fine = read_snapshot((dir / kFineFile).string());
    c.circ = read_snapshot((dir / kCircFile).string());
    if (c.coarse.n != c.n || c.fine.n != c.n * c.m || c.circ.n != c.n) {
        throw FormatError("coupling bundle snapshots disagree with sidecar scales");
    }
    return c;
}

}  // namespace lfpp

#endif  // LFPP_COUPLING_HPP
