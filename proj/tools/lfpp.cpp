// lfpp: command-line front end for sampling, couplings, distances and
// exponent experiments. Exit codes: 0 ok, 1 error, 2 assertion failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lfpp/analysis.hpp"
#include "lfpp/batch.hpp"
#include "lfpp/coupling.hpp"
#include "lfpp/field.hpp"
#include "lfpp/gff.hpp"
#include "lfpp/lattice.hpp"
#include "lfpp/metric.hpp"

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitError = 1;
constexpr int kExitAssertion = 2;

struct AssertionFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

lfpp::RealPoint parse_real_point(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw lfpp::InvalidArgument("point must be written x,y: '" + s + "'");
    try {
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::logic_error&) {
        throw lfpp::InvalidArgument("point must be written x,y: '" + s + "'");
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw lfpp::Error("cannot open '" + path + "' for writing");
    return out;
}

// Writes to `path`, or to stdout when path is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
    } else {
        auto out = open_out(path);
        fn(out);
    }
}

lfpp::RectRegion region_or(const std::string& path, lfpp::RectRegion fallback, bool interior_only = false) {
    return path.empty() ? fallback : lfpp::load_region(path, interior_only);
}

// ---------------------------------------------------------------------------

struct SampleOpts {
    int n = 0;
    std::uint64_t seed = 0;
    std::string out;
};

void cmd_sample(const SampleOpts& o) {
    const auto field = lfpp::sample_dgff(o.n, o.seed);
    lfpp::write_snapshot(o.out, field);
    std::cout << "n=" << field.n << " seed=" << field.seed << " min=" << lfpp::format_double(lfpp::field_min(field))
              << " max=" << lfpp::format_double(lfpp::field_max(field)) << " checksum=" << hex32(lfpp::checksum(field))
              << '\n';
}

struct CoupleOpts {
    int n = 0;
    int m = 0;
    std::uint64_t seed = 0;
    std::string mode = "exact-coarse";
    std::string out;
    std::string region;
    double tolerance = lfpp::ProjectionSolver::kDefaultTolerance;
    std::string method = "cholesky";
};

void cmd_couple(const CoupleOpts& o, unsigned /*jobs*/) {
    if (o.n < 12) throw lfpp::InvalidArgument("couple needs n >= 12");
    if (o.m < 2) throw lfpp::InvalidArgument("couple needs m >= 2");
    lfpp::check_budget(o.n, o.m);
    const auto mode = lfpp::parse_coupling_mode(o.mode);
    if (o.method != "cholesky" && o.method != "cg") throw lfpp::InvalidArgument("method must be cholesky or cg");
    const auto method = o.method == "cg" ? lfpp::ProjectionSolver::Method::ConjugateGradient
                                         : lfpp::ProjectionSolver::Method::SparseCholesky;
    const auto region = region_or(o.region, lfpp::RectRegion::center_half_square(), true);
    const lfpp::ProjectionSolver solver(o.n, o.m, o.tolerance, method);
    const auto c = lfpp::build_coupling(o.n, o.m, o.seed, mode, solver);
    lfpp::write_coupling_bundle(o.out, c, o.tolerance);
    // Projecting the coupled fine field must reproduce the coarse field.
    const auto check = solver.project(c.fine.values);
    double recovery = 0.0;
    for (std::size_t i = 0; i < check.coarse.size(); ++i)
        recovery = std::max(recovery, std::abs(check.coarse[i] - c.coarse.values[i]));
    std::cout << "n=" << c.n << " m=" << c.m << " seed=" << c.seed << " mode=" << lfpp::to_string(c.mode) << '\n'
              << "projection_residual=" << lfpp::format_double(check.relative_residual) << '\n'
              << "projection_recovery_error=" << lfpp::format_double(recovery) << '\n'
              << "discrepancy_stat=" << lfpp::format_double(lfpp::discrepancy_stat(c, region)) << '\n'
              << "checksums coarse=" << hex32(lfpp::checksum(c.coarse)) << " fine=" << hex32(lfpp::checksum(c.fine))
              << " circ=" << hex32(lfpp::checksum(c.circ)) << '\n';
}

struct DistOpts {
    std::string kind = "dlfpp";
    std::string field;
    std::string bundle;
    int sample_n = 0;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> u;
    std::vector<std::string> v;
    double xi = 0.4;
    std::string region;
    std::string queries;
    std::string out;
    std::string geodesic_out;
};

void cmd_dist(const DistOpts& o) {
    std::optional<lfpp::FieldSample> field;
    std::optional<lfpp::CouplingSample> coupling;
    if (!o.field.empty()) {
        field = lfpp::read_snapshot(o.field);
    } else if (o.sample_n > 0) {
        if (!o.seed) throw lfpp::InvalidArgument("--sample-inline needs an explicit --seed");
        field = lfpp::sample_dgff(o.sample_n, *o.seed);
    }
    if (!o.bundle.empty()) coupling = lfpp::read_coupling_bundle(o.bundle);
    const lfpp::BatchInputs inputs{field ? &*field : nullptr, coupling ? &*coupling : nullptr};

    std::vector<lfpp::BatchQuery> batch;
    if (!o.queries.empty()) {
        std::ifstream in(o.queries);
        if (!in) throw lfpp::Error("cannot open query batch '" + o.queries + "'");
        batch = lfpp::read_batch(in);
    } else {
        if (o.u.empty() || o.v.empty()) throw lfpp::InvalidArgument("dist needs --u and --v, or --queries");
        lfpp::BatchQuery q;
        q.kind = lfpp::parse_metric_kind(o.kind);
        q.xi = o.xi;
        for (const auto& s : o.u) q.source.push_back(parse_real_point(s));
        for (const auto& s : o.v) q.target.push_back(parse_real_point(s));
        if (!o.region.empty()) q.region = lfpp::load_region(o.region);
        batch.push_back(std::move(q));
    }

    emit(o.out, [&](std::ostream& out) {
        out << lfpp::kBatchCsvHeader << '\n';
        for (std::size_t i = 0; i < batch.size(); ++i) lfpp::write_batch_row(out, lfpp::run_query(batch[i], inputs, i));
    });

    if (!o.geodesic_out.empty()) {
        if (batch.size() != 1 || batch[0].kind == lfpp::MetricKind::FineLFPP) {
            throw lfpp::InvalidArgument("--geodesic-out needs a single vertex-metric query");
        }
        const auto& q = batch[0];
        const lfpp::FieldSample* f = q.kind == lfpp::MetricKind::DLFPP ? inputs.field
                                                                       : (inputs.coupling ? &inputs.coupling->circ : nullptr);
        if (!f) throw lfpp::InvalidArgument("no field for the geodesic query");
        lfpp::DistanceQuery dq{{}, {}, q.region ? lfpp::rasterize(*q.region, f->n) : lfpp::DomainMask::full(f->n),
                               q.kind, q.xi, true};
        for (auto p : q.source) dq.source.push_back(lfpp::detail::as_lattice(p));
        for (auto p : q.target) dq.target.push_back(lfpp::detail::as_lattice(p));
        const auto r = q.kind == lfpp::MetricKind::DLFPP ? lfpp::dlfpp_distance(*f, dq) : lfpp::lattice_lfpp_distance(*f, dq);
        auto out = open_out(o.geodesic_out);
        out << "x,y\n";
        if (r.geodesic)
            for (auto p : *r.geodesic) out << p.x << ',' << p.y << '\n';
    }
}

struct CompareOpts {
    std::string bundle;
    std::size_t pairs = 30;
    double xi = 0.4;
    std::uint64_t seed = 0;
    std::string region;
    std::string out;
    std::optional<double> assert_median_max;
};

void cmd_compare(const CompareOpts& o, unsigned jobs) {
    const auto c = lfpp::read_coupling_bundle(o.bundle);
    const auto region = region_or(o.region, lfpp::RectRegion::center_half_square(), true);
    const auto summary = lfpp::compare_metrics(c, region, o.pairs, o.xi, o.seed, jobs);
    emit(o.out, [&](std::ostream& out) {
        out << "pair,zx,zy,wx,wy,dlfpp,correction,fine,r\n";
        for (std::size_t i = 0; i < summary.pairs.size(); ++i) {
            const auto& p = summary.pairs[i];
            out << i << ',' << p.z.x << ',' << p.z.y << ',' << p.w.x << ',' << p.w.y << ','
                << lfpp::format_double(p.dlfpp) << ',' << lfpp::format_double(p.correction) << ','
                << lfpp::format_double(p.fine) << ',' << lfpp::format_double(p.r) << '\n';
        }
    });
    nlohmann::ordered_json j{{"n", c.n}, {"m", c.m}, {"xi", o.xi}, {"pairs", o.pairs},
                             {"median_r", summary.median}, {"max_r", summary.max}};
    std::cerr << j.dump() << '\n';
    if (o.assert_median_max && !(summary.median <= *o.assert_median_max)) {
        throw AssertionFailed("median r " + lfpp::format_double(summary.median) + " exceeds " +
                              lfpp::format_double(*o.assert_median_max));
    }
}

struct ExponentOpts {
    double xi = 0.0;
    std::vector<int> ladder;
    int reps = 10;
    std::uint64_t seed = 0;
    std::string csv;
    std::string json;
    std::optional<double> assert_slope_max;
    std::optional<double> assert_slope_min;
    bool assert_bound_check = false;
    double bound_slack = 0.0;
};

void check_exponent_assertions(const lfpp::ExponentEstimate& est, const ExponentOpts& o) {
    if (o.assert_slope_max && !(est.slope <= *o.assert_slope_max)) {
        throw AssertionFailed("slope " + lfpp::format_double(est.slope) + " exceeds " +
                              lfpp::format_double(*o.assert_slope_max));
    }
    if (o.assert_slope_min && !(est.slope >= *o.assert_slope_min)) {
        throw AssertionFailed("slope " + lfpp::format_double(est.slope) + " is below " +
                              lfpp::format_double(*o.assert_slope_min));
    }
    if (o.assert_bound_check) {
        const auto implied = est.slope > 0 ? lfpp::implied_dgamma(est.xi, est.slope, o.bound_slack) : std::nullopt;
        if (!implied) throw AssertionFailed("no implied (gamma, d_gamma) for this slope");
        if (!implied->bound_check) throw AssertionFailed("d_gamma >= 2 + gamma^2/2 fails for the estimate");
    }
}

void write_exponent_outputs(const lfpp::ExponentEstimate& est, const ExponentOpts& o) {
    if (!o.csv.empty()) {
        auto out = open_out(o.csv);
        lfpp::write_experiment_csv(out, est.samples);
    }
    const auto j = lfpp::experiment_summary_json(est);
    if (!o.json.empty()) {
        auto out = open_out(o.json);
        out << j.dump(2) << '\n';
    }
    std::cout << j.dump(2) << '\n';
}

void cmd_exponent(const ExponentOpts& o, unsigned jobs) {
    const auto est = lfpp::estimate_exponent(o.xi, o.ladder, o.reps, o.seed, jobs);
    write_exponent_outputs(est, o);
    check_exponent_assertions(est, o);
}

struct LevelsetOpts {
    int n = 0;
    std::optional<std::uint64_t> seed;
    std::string field;
    double chi = lfpp::kDefaultChi;
    std::optional<double> threshold;
    std::optional<double> xi;
    std::string path_out;
};

void cmd_levelset(const LevelsetOpts& o) {
    lfpp::FieldSample field;
    if (!o.field.empty()) {
        field = lfpp::read_snapshot(o.field);
    } else {
        if (!o.seed) throw lfpp::InvalidArgument("levelset needs --seed (or --field)");
        field = lfpp::sample_dgff(o.n, *o.seed);
    }
    const auto q = o.threshold ? lfpp::LevelSetQuery::with_threshold(field.n, *o.threshold)
                               : lfpp::LevelSetQuery::from_chi(field.n, o.chi);
    const auto r = lfpp::levelset_crossing(field, q);
    nlohmann::ordered_json j{{"n", field.n}, {"seed", field.seed}, {"threshold", q.threshold},
                             {"crossing_found", r.found}, {"hop_count", r.hop_count}};
    if (q.chi) j["chi"] = *q.chi;
    if (o.xi) {
        const double d = lfpp::annulus_distance(field, *o.xi, q.annulus).distance;
        j["xi"] = *o.xi;
        j["dlfpp_annulus_distance"] = d;
        if (r.found) j["cost_bound"] = lfpp::levelset_cost_bound(r, *o.xi, q.threshold);
    }
    std::cout << j.dump(2) << '\n';
    if (!o.path_out.empty()) {
        auto out = open_out(o.path_out);
        out << "x,y\n";
        if (r.path)
            for (auto p : *r.path) out << p.x << ',' << p.y << '\n';
    }
}

struct ReportOpts {
    std::string csv;
    std::string json;
    ExponentOpts asserts;
};

void cmd_report(const ReportOpts& o) {
    std::ifstream in(o.csv);
    if (!in) throw lfpp::Error("cannot open experiment CSV '" + o.csv + "'");
    const auto samples = lfpp::read_experiment_csv(in);
    if (samples.empty()) throw lfpp::FormatError("experiment CSV has no rows");
    std::vector<int> ladder;
    for (const auto& s : samples) {
        if (s.xi != samples.front().xi) throw lfpp::FormatError("experiment CSV mixes several xi values");
        if (std::find(ladder.begin(), ladder.end(), s.n) == ladder.end()) ladder.push_back(s.n);
    }
    std::sort(ladder.begin(), ladder.end());
    const auto est = lfpp::summarize_exponent(samples.front().xi, ladder, samples);
    ExponentOpts out = o.asserts;
    out.json = o.json;
    out.csv.clear();
    write_exponent_outputs(est, out);
    check_exponent_assertions(est, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Liouville first passage percolation toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML-style config file (flags override it)");
    int schema_version = 0;
    auto* schema_opt = app.add_option("--schema-version,--schema_version", schema_version, "Config schema version (must be 1)");
    unsigned jobs = lfpp::default_jobs();
    app.add_option("--jobs,-j", jobs, "Worker threads for replicate fan-out")->check(CLI::PositiveNumber);
    std::string save_config;
    app.add_option("--save-config", save_config, "Write the effective configuration to this file");

    SampleOpts so;
    auto* sample = app.add_subcommand("sample", "Sample a zero-boundary DGFF and write a field snapshot");
    sample->add_option("--n", so.n, "Lattice scale")->required()->check(CLI::Range(2, 1 << 15));
    sample->add_option("--seed", so.seed, "64-bit seed")->required();
    sample->add_option("--out,-o", so.out, "Snapshot path")->required();

    CoupleOpts co;
    auto* couple = app.add_subcommand("couple", "Build a coupled (coarse DGFF, fine field) bundle");
    couple->add_option("--n", co.n, "Coarse scale")->required();
    couple->add_option("--m", co.m, "Mesh refinement")->required();
    couple->add_option("--seed", co.seed, "64-bit seed")->required();
    couple->add_option("--mode", co.mode, "exact-coarse | direct-projection")->capture_default_str();
    couple->add_option("--out,-o", co.out, "Bundle directory")->required();
    couple->add_option("--region", co.region, "Region file for the discrepancy statistic");
    couple->add_option("--tolerance", co.tolerance, "Projection relative tolerance")->capture_default_str();
    couple->add_option("--method", co.method, "cholesky | cg")->capture_default_str();

    DistOpts dopt;
    std::uint64_t dist_seed = 0;
    auto* dist = app.add_subcommand("dist", "Shortest-path distances (single query or JSON-lines batch)");
    dist->add_option("--kind", dopt.kind, "dlfpp | lattice-lfpp | fine-lfpp")->capture_default_str();
    dist->add_option("--field", dopt.field, "Field snapshot (dlfpp)");
    dist->add_option("--bundle", dopt.bundle, "Coupling bundle (lattice-lfpp, fine-lfpp)");
    dist->add_option("--sample-inline", dopt.sample_n, "Sample a DGFF of this scale instead of reading --field");
    auto* dist_seed_opt = dist->add_option("--seed", dist_seed, "Seed for --sample-inline");
    dist->add_option("--u", dopt.u, "Source vertex x,y (repeatable)");
    dist->add_option("--v", dopt.v, "Target vertex x,y (repeatable)");
    dist->add_option("--xi", dopt.xi, "Inverse temperature")->capture_default_str();
    dist->add_option("--region", dopt.region, "Region file restricting paths");
    dist->add_option("--queries", dopt.queries, "JSON-lines query batch");
    dist->add_option("--out,-o", dopt.out, "CSV output (default stdout)");
    dist->add_option("--geodesic-out", dopt.geodesic_out, "Write the geodesic vertices as CSV");

    CompareOpts cmp;
    auto* compare = app.add_subcommand("compare", "Compare DLFPP with fine-mesh LFPP on a coupling bundle");
    compare->add_option("--bundle", cmp.bundle, "Coupling bundle")->required();
    compare->add_option("--pairs", cmp.pairs, "Number of vertex pairs")->capture_default_str();
    compare->add_option("--xi", cmp.xi, "Inverse temperature")->capture_default_str();
    compare->add_option("--seed", cmp.seed, "Seed for pair selection")->required();
    compare->add_option("--region", cmp.region, "Interior region file (default centered half-square)");
    compare->add_option("--out,-o", cmp.out, "CSV output (default stdout)");
    compare->add_option("--assert-median-max", cmp.assert_median_max, "Exit 2 if the median r exceeds this");

    ExponentOpts eo;
    auto* exponent = app.add_subcommand("exponent", "Estimate the annulus-distance exponent");
    exponent->add_option("--xi", eo.xi, "Inverse temperature")->required();
    exponent->add_option("--ladder", eo.ladder, "Strictly increasing sizes, e.g. 64,128,256,512")
        ->required()
        ->delimiter(',');
    exponent->add_option("--reps", eo.reps, "Replicates per size (>= 5)")->capture_default_str();
    exponent->add_option("--seed", eo.seed, "64-bit seed")->required();
    exponent->add_option("--csv", eo.csv, "Per-replicate CSV output");
    exponent->add_option("--json", eo.json, "JSON summary output");
    exponent->add_option("--assert-slope-max", eo.assert_slope_max, "Exit 2 if the slope exceeds this");
    exponent->add_option("--assert-slope-min", eo.assert_slope_min, "Exit 2 if the slope is below this");
    exponent->add_flag("--assert-bound-check", eo.assert_bound_check, "Exit 2 unless d_gamma >= 2 + gamma^2/2 - slack");
    exponent->add_option("--bound-slack", eo.bound_slack, "Slack for --assert-bound-check")->capture_default_str();

    LevelsetOpts lo;
    std::uint64_t level_seed = 0;
    auto* levelset = app.add_subcommand("levelset", "Search for a low level-set crossing of the annulus");
    levelset->add_option("--n", lo.n, "Lattice scale (when sampling)");
    auto* level_seed_opt = levelset->add_option("--seed", level_seed, "64-bit seed (when sampling)");
    levelset->add_option("--field", lo.field, "Field snapshot instead of sampling");
    levelset->add_option("--chi", lo.chi, "Threshold exponent in (1/2, 1): t = (log n)^chi")->capture_default_str();
    levelset->add_option("--threshold", lo.threshold, "Explicit threshold t (overrides --chi)");
    levelset->add_option("--xi", lo.xi, "Also report the DLFPP annulus distance and cost bound");
    levelset->add_option("--path-out", lo.path_out, "Write the crossing path as CSV");

    ReportOpts ro;
    auto* report = app.add_subcommand("report", "Summarize an experiment CSV");
    report->add_option("--csv", ro.csv, "Experiment CSV from `exponent --csv`")->required();
    report->add_option("--json", ro.json, "JSON summary output");
    report->add_option("--assert-slope-max", ro.asserts.assert_slope_max, "Exit 2 if the slope exceeds this");
    report->add_option("--assert-slope-min", ro.asserts.assert_slope_min, "Exit 2 if the slope is below this");
    report->add_flag("--assert-bound-check", ro.asserts.assert_bound_check, "Exit 2 unless the bound check holds");
    report->add_option("--bound-slack", ro.asserts.bound_slack, "Slack for --assert-bound-check");

    for (auto* sub : app.get_subcommands({})) sub->configurable();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitError;
    }

    try {
        const bool from_config = app.get_config_ptr() && app.get_config_ptr()->count() > 0;
        if (from_config && schema_opt->count() == 0) {
            throw lfpp::FormatError("config file is missing schema_version (expected " +
                                    std::to_string(kSchemaVersion) + ")");
        }
        if (schema_opt->count() > 0 && schema_version != kSchemaVersion) {
            throw lfpp::FormatError("unsupported config schema_version " + std::to_string(schema_version) +
                                    " (expected " + std::to_string(kSchemaVersion) + ")");
        }
        if (!save_config.empty()) {
            auto out = open_out(save_config);
            out << "schema_version=" << kSchemaVersion << '\n';
            std::istringstream lines(app.config_to_str(false, false));
            for (std::string line; std::getline(lines, line);) {
                if (line.rfind("schema", 0) == 0 || line.rfind("save-config", 0) == 0 || line.rfind("config", 0) == 0) continue;
                out << line << '\n';
            }
        }
        if (dist_seed_opt->count() > 0) dopt.seed = dist_seed;
        if (level_seed_opt->count() > 0) lo.seed = level_seed;

        if (*sample) cmd_sample(so);
        else if (*couple) cmd_couple(co, jobs);
        else if (*dist) cmd_dist(dopt);
        else if (*compare) cmd_compare(cmp, jobs);
        else if (*exponent) cmd_exponent(eo, jobs);
        else if (*levelset) cmd_levelset(lo);
        else if (*report) cmd_report(ro);
    } catch (const AssertionFailed& e) {
        std::cerr << "assertion failed: " << e.what() << '\n';
        return kExitAssertion;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return 0;
}
