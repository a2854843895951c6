#ifndef LFPP_GFF_HPP
#define LFPP_GFF_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "dst.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "lattice.hpp"
#include "rng.hpp"

namespace lfpp {

/// Largest n for which the exact Green oracle may be built.
inline constexpr int kGreenOracleMaxN = 256;

/// sqrt(pi/2): converts DGFF units to continuum-GFF units.
inline const double kSqrtHalfPi = std::sqrt(std::numbers::pi / 2.0);

/// Dirichlet Laplacian of the interior vertices of {0..n}^2: 4 on the
/// diagonal, -1 per interior neighbour. Interior vertex (x, y) has dof
/// (y-1)*(n-1) + (x-1).
inline Eigen::SparseMatrix<double> interior_dirichlet_laplacian(int n) {
    const int side = n - 1;
    const int dofs = side * side;
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(dofs) * 5);
    auto dof = [side](int x, int y) { return (y - 1) * side + (x - 1); };
    for (int y = 1; y < n; ++y) {
        for (int x = 1; x < n; ++x) {
            const int i = dof(x, y);
            entries.emplace_back(i, i, 4.0);
            if (x > 1) entries.emplace_back(i, dof(x - 1, y), -1.0);
            if (x < n - 1) entries.emplace_back(i, dof(x + 1, y), -1.0);
            if (y > 1) entries.emplace_back(i, dof(x, y - 1), -1.0);
            if (y < n - 1) entries.emplace_back(i, dof(x, y + 1), -1.0);
        }
    }
    Eigen::SparseMatrix<double> lap(dofs, dofs);
    lap.setFromTriplets(entries.begin(), entries.end());
    return lap;
}

/// Exact Green function of simple random walk on {0..n}^2 killed at the
/// outer boundary: G = 4 L^{-1} on interior vertices, zero elsewhere.
class GreenOracle {
public:
    explicit GreenOracle(int n) : n_(n) {
        if (n < 2) throw InvalidArgument("Green oracle needs n >= 2");
        if (n > kGreenOracleMaxN) {
            throw BudgetExceeded("Green oracle limited to n <= " + std::to_string(kGreenOracleMaxN) + ", got " +
                                 std::to_string(n));
        }
        solver_.compute(interior_dirichlet_laplacian(n));
        if (solver_.info() != Eigen::Success) throw Error("Green oracle factorization failed");
    }

    int n() const noexcept { return n_; }

    /// G(., v) over all (n+1)^2 vertices.
    std::vector<double> column(LatticePoint v) const {
        check(v);
        std::vector<double> out(vertex_count(n_), 0.0);
        if (on_square_boundary(n_, v.x, v.y)) return out;
        const int side = n_ - 1;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(side * side);
        rhs[(v.y - 1) * side + (v.x - 1)] = 4.0;
        const Eigen::VectorXd sol = solver_.solve(rhs);
        for (int y = 1; y < n_; ++y)
            for (int x = 1; x < n_; ++x) out[vertex_index(n_, x, y)] = sol[(y - 1) * side + (x - 1)];
        return out;
    }

    double operator()(LatticePoint u, LatticePoint v) const {
        check(u);
        if (on_square_boundary(n_, u.x, u.y)) return 0.0;
        return column(v)[vertex_index(n_, u.x, u.y)];
    }

private:
    void check(LatticePoint p) const {
        if (p.x < 0 || p.y < 0 || p.x > n_ || p.y > n_) throw InvalidArgument("vertex outside {0..n}^2");
    }

    int n_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

inline double green_function(int n, LatticePoint u, LatticePoint v) { return GreenOracle(n)(u, v); }

inline LatticePoint center_vertex(int n) { return {n / 2, n / 2}; }

/// Eigenvalue of the interior Dirichlet Laplacian for sine mode (j, k).
inline double dirichlet_eigenvalue(int n, int j, int k) {
    return 4.0 - 2.0 * std::cos(std::numbers::pi * j / n) - 2.0 * std::cos(std::numbers::pi * k / n);
}

/// Zero-boundary DGFF built from standard normal mode coefficients
/// noise[(k-1)*(n-1) + (j-1)], j,k = 1..n-1. Linear in `noise`.
inline std::vector<double> dgff_from_noise(int n, std::span<const double> noise) {
    if (n < 2) throw InvalidArgument("DGFF needs n >= 2");
    const int side = n - 1;
    if (noise.size() != static_cast<std::size_t>(side) * side) throw InvalidArgument("noise length must be (n-1)^2");
    std::vector<double> coeff(noise.begin(), noise.end());
    for (int k = 1; k <= side; ++k)
        for (int j = 1; j <= side; ++j) coeff[(k - 1) * side + (j - 1)] *= std::sqrt(4.0 / dirichlet_eigenvalue(n, j, k));
    dst1_2d(coeff, side);
    // Orthonormal modes are (2/n) sin sin; the raw transform carries a factor 4.
    const double scale = 1.0 / (2.0 * n);
    std::vector<double> values(vertex_count(n), 0.0);
    for (int y = 1; y < n; ++y)
        for (int x = 1; x < n; ++x) values[vertex_index(n, x, y)] = scale * coeff[(y - 1) * side + (x - 1)];
    return values;
}

inline std::vector<double> dgff_noise(int n, std::uint64_t seed, std::uint64_t stream) {
    const std::size_t count = static_cast<std::size_t>(n - 1) * (n - 1);
    const CounterRng rng(seed, stream ^ (static_cast<std::uint64_t>(n) << 32));
    std::vector<double> noise(count);
    for (std::size_t i = 0; i < count; ++i) noise[i] = rng.normal(i);
    return noise;
}

/// Exact sample of the zero-boundary DGFF on {0..n}^2 with covariance G.
inline FieldSample sample_dgff(int n, std::uint64_t seed, FieldKind kind = FieldKind::CoarseDGFF, int m = 1,
                               std::uint64_t stream = kStreamCoarse) {
    if (n < 2) throw InvalidArgument("DGFF needs n >= 2, got " + std::to_string(n));
    FieldSample field(n, m, kind, seed);
    field.values = dgff_from_noise(n, dgff_noise(n, seed, stream));
    return field;
}

struct LogProfileRow {
    int n;
    double green_center;
    double residual;  ///< G(center, center) - (2/pi) log n
};

inline std::vector<LogProfileRow> covariance_log_profile(std::span<const int> n_list) {
    std::vector<LogProfileRow> rows;
    for (int n : n_list) {
        const GreenOracle oracle(n);
        const auto c = center_vertex(n);
        const double g = oracle(c, c);
        rows.push_back({n, g, g - 2.0 / std::numbers::pi * std::log(static_cast<double>(n))});
    }
    return rows;
}

inline double field_max(const FieldSample& field) {
    if (field.values.empty()) throw InvalidArgument("empty field");
    return *std::max_element(field.values.begin(), field.values.end());
}

inline double field_min(const FieldSample& field) {
    if (field.values.empty()) throw InvalidArgument("empty field");
    return *std::min_element(field.values.begin(), field.values.end());
}

}  // namespace lfpp

#endif  // LFPP_GFF_HPP
