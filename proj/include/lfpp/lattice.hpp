#ifndef LFPP_LATTICE_HPP
#define LFPP_LATTICE_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "errors.hpp"

namespace lfpp {

using Rational = boost::rational<std::int64_t>;

struct LatticePoint {
    int x = 0;
    int y = 0;
    friend constexpr auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

struct RealPoint {
    double x = 0.0;
    double y = 0.0;
};

struct RationalPoint {
    Rational x;
    Rational y;
    friend bool operator==(const RationalPoint&, const RationalPoint&) = default;
};

/// Row-major index of (x, y) in a {0..n}^2 array.
constexpr std::size_t vertex_index(int n, int x, int y) noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(n + 1) + static_cast<std::size_t>(x);
}

constexpr std::size_t vertex_count(int n) noexcept {
    return static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(n + 1);
}

constexpr bool on_square_boundary(int n, int x, int y) noexcept {
    return x == 0 || y == 0 || x == n || y == n;
}

// Rounds to the nearest integer, ties toward the smaller one.
inline std::int64_t round_half_down(const Rational& r) {
    const Rational shifted = r - Rational(1, 2);
    std::int64_t f = boost::rational_cast<std::int64_t>(shifted);  // truncates toward zero
    if (Rational(f) > shifted) --f;                                // now floor
    return Rational(f) == shifted ? f : f + 1;                     // ceil(r - 1/2)
}

inline std::int64_t round_half_down(double v) { return static_cast<std::int64_t>(std::ceil(v - 0.5)); }

/// [nz]: the lattice point closest to n*z. Ties go to the smaller coordinate,
/// which is also the lexicographically smaller candidate.
inline LatticePoint nearest_lattice_point(RealPoint z, int n) {
    return {static_cast<int>(round_half_down(z.x * n)), static_cast<int>(round_half_down(z.y * n))};
}

inline LatticePoint nearest_lattice_point(const RationalPoint& z, int n) {
    return {static_cast<int>(round_half_down(z.x * n)), static_cast<int>(round_half_down(z.y * n))};
}

/// Axis-aligned simple polygon inside the unit square, with exact rational
/// vertices in boundary order (either orientation).
class RectRegion {
public:
    RectRegion() = default;

    RectRegion(std::vector<RationalPoint> vertices, bool interior_only = false)
        : vertices_(std::move(vertices)), interior_only_(interior_only) {
        validate();
    }

    /// Axis-aligned rectangle [x0,x1] x [y0,y1].
    static RectRegion box(Rational x0, Rational y0, Rational x1, Rational y1, bool interior_only = false) {
        return RectRegion({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, interior_only);
    }

    static RectRegion unit_square() { return box(0, 0, 1, 1); }

    /// The centered square of side 1/2.
    static RectRegion center_half_square() {
        return box(Rational(1, 4), Rational(1, 4), Rational(3, 4), Rational(3, 4), true);
    }

    const std::vector<RationalPoint>& vertices() const noexcept { return vertices_; }
    bool interior_only() const noexcept { return interior_only_; }
    std::size_t edge_count() const noexcept { return vertices_.size(); }

    std::pair<RationalPoint, RationalPoint> edge(std::size_t i) const {
        return {vertices_[i], vertices_[(i + 1) % vertices_.size()]};
    }

    Rational edge_length(std::size_t i) const {
        auto [a, b] = edge(i);
        return abs(a.x - b.x) + abs(a.y - b.y);
    }

    /// Whether a point lies in the closed polygon.
    bool contains(const RationalPoint& p) const {
        bool inside = false;
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            auto [a, b] = edge(i);
            if (on_segment(a, b, p)) return true;
            if (a.x == b.x) {
                const Rational lo = std::min(a.y, b.y);
                const Rational hi = std::max(a.y, b.y);
                if (lo <= p.y && p.y < hi && a.x > p.x) inside = !inside;
            }
        }
        return inside;
    }

    bool contains(const RealPoint& p) const {
        // Exact enough for the property tests: converts through a fine rational grid.
        constexpr std::int64_t den = std::int64_t{1} << 30;
        return contains(RationalPoint{Rational(std::llround(p.x * den), den), Rational(std::llround(p.y * den), den)});
    }

    Rational min_boundary_distance() const {
        Rational d = 1;
        for (const auto& v : vertices_) {
            d = std::min({d, v.x, v.y, Rational(1) - v.x, Rational(1) - v.y});
        }
        return d;
    }

private:
    static bool on_segment(const RationalPoint& a, const RationalPoint& b, const RationalPoint& p) {
        if (a.x == b.x) return p.x == a.x && std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
        return p.y == a.y && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x);
    }

    static bool segments_touch(const RationalPoint& a, const RationalPoint& b, const RationalPoint& c,
                               const RationalPoint& d) {
        const Rational ax0 = std::min(a.x, b.x), ax1 = std::max(a.x, b.x);
        const Rational ay0 = std::min(a.y, b.y), ay1 = std::max(a.y, b.y);
        const Rational cx0 = std::min(c.x, d.x), cx1 = std::max(c.x, d.x);
        const Rational cy0 = std::min(c.y, d.y), cy1 = std::max(c.y, d.y);
        return ax0 <= cx1 && cx0 <= ax1 && ay0 <= cy1 && cy0 <= ay1;
    }

    void validate() const {
        const std::size_t k = vertices_.size();
        if (k < 4 || k % 2 != 0) throw InvalidArgument("rectilinear region needs an even number (>= 4) of vertices");
        for (const auto& v : vertices_) {
            if (v.x < 0 || v.x > 1 || v.y < 0 || v.y > 1) throw InvalidArgument("region vertex outside [0,1]^2");
        }
        for (std::size_t i = 0; i < k; ++i) {
            auto [a, b] = edge(i);
            if (a == b) throw InvalidArgument("region has a zero-length edge");
            if (a.x != b.x && a.y != b.y) throw InvalidArgument("region edge is not axis-parallel");
            auto [c, d] = edge((i + 1) % k);
            if ((a.x == b.x) == (c.x == d.x)) throw InvalidArgument("consecutive region edges must alternate direction");
        }
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 2; j < k; ++j) {
                if (i == 0 && j == k - 1) continue;  // adjacent through the wrap-around
                auto [a, b] = edge(i);
                auto [c, d] = edge(j);
                if (segments_touch(a, b, c, d)) throw InvalidArgument("region is not simple");
            }
        }
        if (interior_only_ && min_boundary_distance() <= 0) {
            throw InvalidArgument("interior_only region touches the boundary of the unit square");
        }
    }

    std::vector<RationalPoint> vertices_;
    bool interior_only_ = false;
};

/// Dense membership bitmap over {0..n}^2.
class DomainMask {
public:
    DomainMask() = default;
    DomainMask(int n, bool fill) : n_(n), bits_(vertex_count(n), fill ? 1 : 0) {
        if (n < 1) throw InvalidArgument("mask scale must be positive");
    }

    static DomainMask full(int n) { return DomainMask(n, true); }

    int n() const noexcept { return n_; }
    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x <= n_ && y <= n_ && bits_[vertex_index(n_, x, y)] != 0;
    }
    bool contains(LatticePoint p) const noexcept { return contains(p.x, p.y); }
    bool test(std::size_t idx) const noexcept { return bits_[idx] != 0; }
    void set(int x, int y, bool value = true) { bits_.at(vertex_index(n_, x, y)) = value ? 1 : 0; }

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }

    std::vector<LatticePoint> points() const {
        std::vector<LatticePoint> out;
        for (int y = 0; y <= n_; ++y)
            for (int x = 0; x <= n_; ++x)
                if (contains(x, y)) out.push_back({x, y});
        return out;
    }

    bool subset_of(const DomainMask& other) const {
        if (other.n_ != n_) return false;
        for (std::size_t i = 0; i < bits_.size(); ++i)
            if (bits_[i] && !other.bits_[i]) return false;
        return true;
    }

    friend bool operator==(const DomainMask&, const DomainMask&) = default;

private:
    int n_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Lattice points of the closed dilated region nP.
inline DomainMask rasterize(const RectRegion& region, int n) {
    if (n < 1) throw InvalidArgument("lattice scale must be positive");
    for (std::size_t i = 0; i < region.edge_count(); ++i) {
        if (region.edge_length(i) * n < 2) {
            throw ScaleTooSmall("scale n=" + std::to_string(n) + " resolves a region edge to fewer than 2 lattice units");
        }
    }
    // Scanline fill: the closed cross-section at row y is the union of the
    // half-open crossing intervals and any horizontal edges lying on the row.
    auto floor_of = [](const Rational& r) {
        std::int64_t q = r.numerator() / r.denominator();
        if (Rational(q) > r) --q;
        return q;
    };
    auto ceil_of = [&](const Rational& r) { return Rational(floor_of(r)) == r ? floor_of(r) : floor_of(r) + 1; };

    DomainMask mask(n, false);
    auto fill = [&](int y, const Rational& lo, const Rational& hi) {
        const auto x0 = std::max<std::int64_t>(0, ceil_of(lo));
        const auto x1 = std::min<std::int64_t>(n, floor_of(hi));
        for (auto x = x0; x <= x1; ++x) mask.set(static_cast<int>(x), y);
    };
    std::vector<Rational> crossings;
    for (int y = 0; y <= n; ++y) {
        const Rational yy(y);
        crossings.clear();
        for (std::size_t i = 0; i < region.edge_count(); ++i) {
            auto [a, b] = region.edge(i);
            const Rational ay = a.y * n, by = b.y * n;
            if (a.x == b.x) {
                if (std::min(ay, by) <= yy && yy < std::max(ay, by)) crossings.push_back(a.x * n);
            } else if (ay == yy) {
                fill(y, std::min(a.x, b.x) * n, std::max(a.x, b.x) * n);
            }
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) fill(y, crossings[k], crossings[k + 1]);
    }
    return mask;
}

enum class BoundaryConvention {
    NearestPoint,       ///< {[a] : a in n dU}
    WithinDistanceOne,  ///< lattice points at Euclidean distance < 1 from n dU
};

/// Lattice approximation of the boundary of nP.
inline DomainMask boundary_mask(const RectRegion& region, int n,
                                BoundaryConvention convention = BoundaryConvention::WithinDistanceOne) {
    DomainMask mask(n, false);
    for (std::size_t i = 0; i < region.edge_count(); ++i) {
        auto [a, b] = region.edge(i);
        const Rational ax = a.x * n, ay = a.y * n, bx = b.x * n, by = b.y * n;
        if (convention == BoundaryConvention::NearestPoint) {
            const auto x0 = round_half_down(std::min(ax, bx)), x1 = round_half_down(std::max(ax, bx));
            const auto y0 = round_half_down(std::min(ay, by)), y1 = round_half_down(std::max(ay, by));
            for (auto y = y0; y <= y1; ++y)
                for (auto x = x0; x <= x1; ++x) mask.set(static_cast<int>(x), static_cast<int>(y));
            continue;
        }
        const double lx = boost::rational_cast<double>(std::min(ax, bx)), hx = boost::rational_cast<double>(std::max(ax, bx));
        const double ly = boost::rational_cast<double>(std::min(ay, by)), hy = boost::rational_cast<double>(std::max(ay, by));
        for (int y = std::max(0, static_cast<int>(std::floor(ly)) - 1); y <= std::min(n, static_cast<int>(std::ceil(hy)) + 1); ++y) {
            for (int x = std::max(0, static_cast<int>(std::floor(lx)) - 1); x <= std::min(n, static_cast<int>(std::ceil(hx)) + 1); ++x) {
                const double dx = std::max({lx - x, 0.0, x - hx});
                const double dy = std::max({ly - y, 0.0, y - hy});
                if (dx * dx + dy * dy < 1.0) mask.set(x, y);
            }
        }
    }
    return mask;
}

/// Annulus of side-1/3 and side-2/3 squares sharing the center of the unit square.
struct AnnulusSpec {
    int n = 0;
    DomainMask inner;           ///< [nS1], the closed inner square
    DomainMask outer_boundary;  ///< [n dS2], the frame of the outer square
};

inline AnnulusSpec annulus(int n) {
    if (n < 12) throw InvalidArgument("annulus needs n >= 12, got " + std::to_string(n));
    AnnulusSpec spec;
    spec.n = n;
    spec.inner = rasterize(RectRegion::box(Rational(1, 3), Rational(1, 3), Rational(2, 3), Rational(2, 3)), n);
    spec.outer_boundary = boundary_mask(RectRegion::box(Rational(1, 6), Rational(1, 6), Rational(5, 6), Rational(5, 6)),
                                        n, BoundaryConvention::NearestPoint);
    return spec;
}

inline Rational parse_rational(std::string_view token) {
    const auto slash = token.find('/');
    auto parse_int = [&](std::string_view s) -> std::int64_t {
        if (s.empty()) throw FormatError("empty number in rational '" + std::string(token) + "'");
        std::size_t pos = 0;
        std::int64_t v = 0;
        try {
            v = std::stoll(std::string(s), &pos);
        } catch (const std::exception&) {
            throw FormatError("bad rational '" + std::string(token) + "'");
        }
        if (pos != s.size()) throw FormatError("bad rational '" + std::string(token) + "'");
        return v;
    };
    if (slash == std::string_view::npos) return Rational(parse_int(token));
    const std::int64_t den = parse_int(token.substr(slash + 1));
    if (den == 0) throw FormatError("zero denominator in '" + std::string(token) + "'");
    return Rational(parse_int(token.substr(0, slash)), den);
}

/// Region text: one "p/q r/s" vertex per line, '#' starts a comment.
inline RectRegion parse_region(std::string_view text, bool interior_only = false) {
    std::vector<RationalPoint> vertices;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string xs, ys, extra;
        if (!(fields >> xs)) continue;
        if (!(fields >> ys) || (fields >> extra)) {
            throw FormatError("region line " + std::to_string(lineno) + ": expected two rationals");
        }
        vertices.push_back({parse_rational(xs), parse_rational(ys)});
    }
    return RectRegion(std::move(vertices), interior_only);
}

inline RectRegion load_region(const std::string& path, bool interior_only = false) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open region file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_region(buf.str(), interior_only);
}

inline std::string format_region(const RectRegion& region) {
    std::ostringstream out;
    for (const auto& v : region.vertices()) {
        out << v.x.numerator() << '/' << v.x.denominator() << ' ' << v.y.numerator() << '/' << v.y.denominator() << '\n';
    }
    return out.str();
}

}  // namespace lfpp

#endif  // LFPP_LATTICE_HPP
