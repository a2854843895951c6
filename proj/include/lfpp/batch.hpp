#ifndef LFPP_BATCH_HPP
#define LFPP_BATCH_HPP

#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coupling.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "lattice.hpp"
#include "metric.hpp"

namespace lfpp {

/// One line of a query batch:
///   {"kind": "dlfpp", "xi": 0.4, "source": [[0,0]], "target": [[3,3],[3,4]],
///    "region": null | "path/to/region.txt" | [["1/4","1/4"], ["3/4","1/4"], ...]}
/// Vertex metrics take lattice points; fine-lfpp takes one real point per side.
struct BatchQuery {
    MetricKind kind = MetricKind::DLFPP;
    double xi = 0.0;
    std::vector<RealPoint> source;
    std::vector<RealPoint> target;
    std::optional<RectRegion> region;
};

struct BatchRow {
    std::size_t index = 0;
    double distance = 0.0;
    double geodesic_length = 0.0;  ///< Euclidean length of the geodesic, coarse lattice units
    std::uint64_t relaxations = 0;
    std::int64_t wall_ns = 0;
};

namespace detail {

inline std::vector<RealPoint> parse_points(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw FormatError(std::string(what) + " must be a nonempty array of [x, y]");
    std::vector<RealPoint> out;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
            throw FormatError(std::string(what) + " entries must be [x, y] number pairs");
        }
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

inline LatticePoint as_lattice(RealPoint p) {
    if (p.x != std::floor(p.x) || p.y != std::floor(p.y)) throw FormatError("vertex metrics need integer coordinates");
    return {static_cast<int>(p.x), static_cast<int>(p.y)};
}

}  // namespace detail

inline BatchQuery parse_batch_query(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("query must be a JSON object");
    for (const char* key : {"kind", "xi", "source", "target"})
        if (!j.contains(key)) throw FormatError(std::string("query is missing '") + key + "'");
    BatchQuery q;
    q.kind = parse_metric_kind(j.at("kind").get<std::string>());
    q.xi = j.at("xi").get<double>();
    q.source = detail::parse_points(j.at("source"), "source");
    q.target = detail::parse_points(j.at("target"), "target");
    if (j.contains("region") && !j.at("region").is_null()) {
        const auto& r = j.at("region");
        if (r.is_string()) {
            q.region = load_region(r.get<std::string>());
        } else if (r.is_array()) {
            std::string text;
            for (const auto& v : r) {
                if (!v.is_array() || v.size() != 2) throw FormatError("region vertices must be [x, y] pairs");
                auto coord = [](const nlohmann::json& c) { return c.is_string() ? c.get<std::string>() : c.dump(); };
                text += coord(v[0]) + " " + coord(v[1]) + "\n";
            }
            q.region = parse_region(text);
        } else {
            throw FormatError("region must be null, a file path, or a vertex list");
        }
    }
    if (q.kind == MetricKind::FineLFPP && (q.source.size() != 1 || q.target.size() != 1)) {
        throw FormatError("fine-lfpp queries take exactly one source and one target point");
    }
    return q;
}

inline std::vector<BatchQuery> read_batch(std::istream& in) {
    std::vector<BatchQuery> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_batch_query(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("query line " + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("query line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

/// Inputs a batch may draw on; each query kind needs its own.
struct BatchInputs {
    const FieldSample* field = nullptr;        ///< DLFPP
    const CouplingSample* coupling = nullptr;  ///< LatticeLFPP (circ) and FineLFPP
};

inline double path_length(std::span<const LatticePoint> path, double unit) {
    double len = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k)
        len += std::hypot(path[k].x - path[k - 1].x, path[k].y - path[k - 1].y);
    return len / unit;
}

inline BatchRow run_query(const BatchQuery& q, const BatchInputs& in, std::size_t index = 0) {
    const auto start = std::chrono::steady_clock::now();
    DistanceResult r;
    double unit = 1.0;
    if (q.kind == MetricKind::FineLFPP) {
        if (!in.coupling) throw InvalidArgument("fine-lfpp queries need a coupling bundle");
        const auto region = q.region.value_or(RectRegion::center_half_square());
        r = fine_lfpp_distance(*in.coupling, q.source[0], q.target[0], region, q.xi, true);
        unit = in.coupling->m;
    } else {
        const FieldSample* f = q.kind == MetricKind::DLFPP ? in.field : (in.coupling ? &in.coupling->circ : nullptr);
        if (!f) {
            throw InvalidArgument(q.kind == MetricKind::DLFPP ? "dlfpp queries need a field snapshot"
                                                              : "lattice-lfpp queries need a coupling bundle");
        }
        DistanceQuery dq;
        dq.kind = q.kind;
        dq.xi = q.xi;
        dq.want_geodesic = true;
        dq.mask = q.region ? rasterize(*q.region, f->n) : DomainMask::full(f->n);
        for (auto p : q.source) dq.source.push_back(detail::as_lattice(p));
        for (auto p : q.target) dq.target.push_back(detail::as_lattice(p));
        r = q.kind == MetricKind::DLFPP ? dlfpp_distance(*f, dq) : lattice_lfpp_distance(*f, dq);
    }
    BatchRow row;
    row.index = index;
    row.distance = r.distance;
    row.geodesic_length = r.geodesic ? path_length(*r.geodesic, unit) : std::nan("");
    row.relaxations = r.relaxations;
    row.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
    return row;
}

inline constexpr const char* kBatchCsvHeader = "query,distance,geodesic_length,relaxations,wall_ns";

inline void write_batch_row(std::ostream& out, const BatchRow& row) {
    auto num = [](double v) {
        if (std::isinf(v)) return std::string("inf");
        if (std::isnan(v)) return std::string("");
        std::ostringstream os;
        os << std::setprecision(17) << v;
        return os.str();
    };
    out << row.index << ',' << num(row.distance) << ',' << num(row.geodesic_length) << ',' << row.relaxations << ','
        << row.wall_ns << '\n';
}

}  // namespace lfpp

#endif  // LFPP_BATCH_HPP
