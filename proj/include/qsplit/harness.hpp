#pragma once

// Experiment runner: strategies per seed, sweeps, CSV output, gradient and
// oracle checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <future>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qsplit/baselines.hpp"
#include "qsplit/config.hpp"
#include "qsplit/ligd.hpp"
#include "qsplit/utility.hpp"

namespace qsplit {

struct MetricsRow {
    std::string scenario_id;
    std::uint64_t seed = 0;
    std::string strategy;
    double sum_t = 0.0;
    double sum_e = 0.0;
    double hard_c = 0.0;
    double hard_z = 0.0;
    double latency_speedup = 0.0;
    double energy_reduction = 0.0;
    std::size_t iterations = 0;
};

inline constexpr const char* csv_header =
    "scenario_id,seed,strategy,sum_t_s,sum_e_j,hard_c_s,hard_z,latency_speedup,energy_reduction,iterations";

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& out, std::span<const MetricsRow> rows) {
    out << csv_header << '\n';
    for (const auto& r : rows) {
        out << r.scenario_id << ',' << r.seed << ',' << r.strategy << ',' << format_double(r.sum_t) << ','
            << format_double(r.sum_e) << ',' << format_double(r.hard_c) << ',' << format_double(r.hard_z) << ','
            << format_double(r.latency_speedup) << ',' << format_double(r.energy_reduction) << ',' << r.iterations
            << '\n';
    }
}

/// 64-bit FNV-1a of a string, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct StrategyOutcome {
    std::string name;
    Totals totals;
    double gamma = 0.0;  // hard objective
    std::size_t iterations = 0;
    SplitVector splits;
};

inline StrategyOutcome run_strategy(const Scenario& sc, const ScenarioConfig& cfg, const std::string& name) {
    StrategyOutcome o;
    o.name = name;
    if (name == "li_gd" || name == "cold_gd") {
        const auto r = name == "li_gd" ? li_gd(sc, cfg.gd) : cold_gd(sc, cfg.gd);
        o.totals = totals_of(r.hard_metrics, sc.qoe);
        o.gamma = r.gamma_rounded;
        o.iterations = r.total_iters;
        o.splits = r.splits;
        return o;
    }
    BaselineResult b;
    if (name == "device_only") b = device_only(sc);
    else if (name == "edge_only") b = edge_only(sc);
    else if (name == "exhaustive_split") b = exhaustive_split(sc);
    else throw ValidationError("strategies: unknown strategy '" + name + "'");
    o.totals = b.totals;
    o.gamma = b.gamma;
    o.splits = b.splits;
    return o;
}

/// Scenario for one seed with the finish-time deadline rule applied.
inline Scenario scenario_for(const ScenarioConfig& cfg, std::uint64_t seed) {
    Scenario sc = build_scenario(cfg, seed);
    if (cfg.finish_multiplier > 0.0) {
        const auto ref = li_gd(sc, cfg.gd);
        double mean = 0.0;
        for (const auto& b : ref.hard_metrics) mean += b.t_total;
        mean /= static_cast<double>(ref.hard_metrics.size());
        for (auto& q : sc.qoe) q.q = cfg.finish_multiplier * mean;
    }
    return sc;
}

/// Every enabled strategy on one seed, normalized to the configured baseline.
inline std::vector<MetricsRow> run_seed(const ScenarioConfig& cfg, std::uint64_t seed, const std::string& scenario_id) {
    const Scenario sc = scenario_for(cfg, seed);
    std::vector<StrategyOutcome> outcomes;
    for (const auto& name : cfg.strategies) outcomes.push_back(run_strategy(sc, cfg, name));
    const StrategyOutcome* base = nullptr;
    for (const auto& o : outcomes)
        if (o.name == cfg.baseline) base = &o;
    StrategyOutcome extra;
    if (!base) {
        extra = run_strategy(sc, cfg, cfg.baseline);
        base = &extra;
    }
    std::vector<MetricsRow> rows;
    for (const auto& o : outcomes) {
        MetricsRow r;
        r.scenario_id = scenario_id;
        r.seed = seed;
        r.strategy = o.name;
        r.sum_t = o.totals.sum_t;
        r.sum_e = o.totals.sum_e;
        r.hard_c = o.totals.hard_c;
        r.hard_z = o.totals.hard_z;
        r.latency_speedup = o.name == base->name ? 1.0 : base->totals.sum_t / o.totals.sum_t;
        r.energy_reduction = o.name == base->name ? 1.0 : base->totals.sum_e / o.totals.sum_e;
        r.iterations = o.iterations;
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace detail {

/// Runs jobs on a bounded pool and returns results in job order.
template <class R>
std::vector<R> run_ordered(std::vector<std::function<R()>> jobs) {
    std::vector<R> out(jobs.size());
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), jobs.size()));
    std::vector<std::future<void>> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t j = w; j < jobs.size(); j += workers) out[j] = jobs[j]();
        }));
    }
    for (auto& f : pool) f.get();
    return out;
}

}  // namespace detail

inline std::string scenario_id(const nlohmann::json& doc) { return fnv1a_hex(doc.dump()); }

inline std::vector<MetricsRow> run(const ScenarioConfig& cfg, std::span<const std::uint64_t> seeds = {}) {
    const std::vector<std::uint64_t> use = seeds.empty() ? cfg.seeds : std::vector<std::uint64_t>(seeds.begin(), seeds.end());
    const auto id = scenario_id(cfg.doc);
    std::vector<std::function<std::vector<MetricsRow>()>> jobs;
    for (auto s : use) jobs.push_back([&cfg, s, id] { return run_seed(cfg, s, id); });
    std::vector<MetricsRow> rows;
    for (auto& group : detail::run_ordered(std::move(jobs))) rows.insert(rows.end(), group.begin(), group.end());
    return rows;
}

// ---------------------------------------------------------------------------
// Sweeps

inline const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> a{"qoe_threshold", "finish_multiplier", "users", "subchannels",
                                            "workload"};
    return a;
}

namespace detail {

inline nlohmann::json::json_pointer axis_pointer(const std::string& axis) {
    if (axis == "qoe_threshold") return nlohmann::json::json_pointer("/qoe/threshold_percent");
    if (axis == "finish_multiplier") return nlohmann::json::json_pointer("/qoe/finish_multiplier");
    if (axis == "users") return nlohmann::json::json_pointer("/topology/users");
    if (axis == "subchannels") return nlohmann::json::json_pointer("/topology/subchannels");
    if (axis == "workload") return nlohmann::json::json_pointer("/workload_scale");
    throw ValidationError("axis: unknown sweep axis '" + axis + "'");
}

inline nlohmann::json with_axis(nlohmann::json doc, const std::string& axis, double value) {
    const auto ptr = axis_pointer(axis);
    if (axis == "users" || axis == "subchannels") {
        if (!(value >= 1.0) || value != std::floor(value))
            throw ValidationError("values: axis '" + axis + "' needs positive integers");
        doc[ptr] = static_cast<std::size_t>(value);
    } else {
        doc[ptr] = value;
    }
    return doc;
}

inline nlohmann::json without_axis(nlohmann::json doc, const std::string& axis) {
    const auto ptr = axis_pointer(axis);
    if (doc.contains(ptr)) doc.at(ptr.parent_pointer()).erase(ptr.back());
    return doc;
}

}  // namespace detail

/// Re-runs the config with the axis value substituted; rows are grouped by
/// value in the given order, seeds in config order within a group. Scenario
/// fields are re-read from `cfg.doc`; run settings (seeds, strategies,
/// baseline, gd) are taken from `cfg` as given.
inline std::vector<MetricsRow> sweep(const ScenarioConfig& cfg, const std::string& axis,
                                     std::span<const double> values) {
    if (values.empty()) throw ValidationError("values: at least one sweep value required");
    const auto base_id = scenario_id(detail::without_axis(cfg.doc, axis));
    std::vector<ScenarioConfig> variants;
    std::vector<std::string> ids;
    for (double v : values) {
        auto& var = variants.emplace_back(parse_config(detail::with_axis(cfg.doc, axis, v), cfg.base_dir));
        var.seeds = cfg.seeds;
        var.strategies = cfg.strategies;
        var.baseline = cfg.baseline;
        var.gd = cfg.gd;
        ids.push_back(base_id + "/" + axis + "=" + format_double(v));
    }
    std::vector<std::function<std::vector<MetricsRow>()>> jobs;
    for (std::size_t j = 0; j < variants.size(); ++j)
        for (auto s : cfg.seeds)
            jobs.push_back([&variants, &ids, j, s] { return run_seed(variants[j], s, ids[j]); });
    std::vector<MetricsRow> rows;
    for (auto& group : detail::run_ordered(std::move(jobs))) rows.insert(rows.end(), group.begin(), group.end());
    return rows;
}

/// Conventions behind the numbers, written next to every CSV.
inline nlohmann::json run_metadata(const ScenarioConfig& cfg, const std::string& axis = {}) {
    nlohmann::json m;
    m["config_hash"] = scenario_id(cfg.doc);
    m["baseline"] = cfg.baseline;
    m["baseline_resource_rule"] = fixed_resource_rule;
    m["device_only_rule"] = "k = F; r = r_min";
    m["latency_speedup"] = "baseline sum_t / strategy sum_t";
    m["energy_reduction"] = "baseline sum_e / strategy sum_e";
    m["qoe_threshold_mapping"] = "deadline_i = base deadline_i / threshold_percent";
    m["finish_multiplier_mapping"] = "deadline_i = multiplier x mean delay of a reference li_gd run";
    m["hard_z"] = "count of users with delay > deadline";
    if (!axis.empty()) m["axis"] = axis;
    return m;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradcheckReport {
    std::size_t points = 0;
    std::size_t excluded = 0;  // non-interior points skipped
    std::size_t coordinates = 0;
    std::size_t failures = 0;
    double worst_error = 0.0;  // max |a - fd| / max(|a|, |fd|) where the relative test binds
    std::vector<std::string> details;
    bool pass() const { return failures == 0 && points > 0; }
};

using GradientHook = std::function<void(AllocationGradient&)>;

/// Central differences of Gamma in long double, step 1e-7 relative to the
/// coordinate (the representable step is used as the divisor). Passes a coordinate when |a - fd| <= max(tol * max(|a|,
/// |fd|), abs_floor).
inline void gradcheck_point(const Scenario& sc, const SplitVector& splits, const RelaxedAllocation& x, double tol,
                            GradcheckReport& rep, const GradientHook& hook = {}, double abs_floor = 1e-8) {
    if (!is_interior(sc, x)) {
        ++rep.excluded;
        return;
    }
    auto g = gradient(sc, splits, x);
    if (hook) hook(g);
    ++rep.points;
    RelaxedAllocation y = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = 1e-7 * std::max(std::abs(x[j]), 1e-3);
        y[j] = x[j] + h;
        const long double hp = static_cast<long double>(y[j]) - x[j];
        const long double fp = gamma_value<long double>(sc, splits, y);
        y[j] = x[j] - h;
        const long double hm = x[j] - static_cast<long double>(y[j]);
        const long double fm = gamma_value<long double>(sc, splits, y);
        y[j] = x[j];
        const double fd = static_cast<double>((fp - fm) / (hp + hm));
        const double a = g[j];
        const double err = std::abs(a - fd);
        const double scale = std::max(std::abs(a), std::abs(fd));
        ++rep.coordinates;
        if (tol * scale > abs_floor) rep.worst_error = std::max(rep.worst_error, err / scale);
        if (err > std::max(tol * scale, abs_floor)) {
            ++rep.failures;
            if (rep.details.size() < 10)
                rep.details.push_back("coordinate " + std::to_string(j) + ": analytic " + format_double(a) +
                                      " vs finite difference " + format_double(fd));
        }
    }
}

/// Random interior allocation: shares bounded away from 0 and boxes
/// sampled from their middle 90%.
inline RelaxedAllocation random_interior(const Scenario& sc, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RelaxedAllocation a(sc.users(), sc.subchannels());
    auto fill = [&](std::vector<double>& beta) {
        for (std::size_t i = 0; i < sc.users(); ++i) {
            double s = 0.0;
            for (std::size_t m = 0; m < sc.subchannels(); ++m) s += (beta[i * sc.subchannels() + m] = 0.05 + unit(rng));
            for (std::size_t m = 0; m < sc.subchannels(); ++m) beta[i * sc.subchannels() + m] /= s;
        }
    };
    fill(a.beta_up);
    fill(a.beta_down);
    auto inside = [&](double lo, double hi) { return lo + (hi - lo) * (0.05 + 0.9 * unit(rng)); };
    for (std::size_t i = 0; i < sc.users(); ++i) {
        a.p[i] = inside(sc.devices[i].p_min, sc.devices[i].p_max);
        a.P[i] = inside(sc.server.P_min, sc.server.P_max);
        a.r[i] = inside(sc.server.r_min, sc.server.r_max);
    }
    return a;
}

/// `n_points` random interior points spread over the config's seeds, each
/// with random per-user splits.
inline GradcheckReport gradcheck(const ScenarioConfig& cfg, std::size_t n_points, double tol,
                                 const GradientHook& hook = {}) {
    GradcheckReport rep;
    std::vector<Scenario> scenarios;
    for (auto s : cfg.seeds) scenarios.push_back(build_scenario(cfg, s));
    std::mt19937_64 rng(cfg.seeds.front() ^ 0x2545f4914f6cdd1dULL);
    const auto& pts = cfg.profile.split_points;
    for (std::size_t n = 0; n < n_points; ++n) {
        const auto& sc = scenarios[n % scenarios.size()];
        SplitVector splits(sc.users());
        for (auto& k : splits) k = pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)];
        gradcheck_point(sc, splits, random_interior(sc, rng), tol, rep, hook);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Oracle check

struct OracleSeedResult {
    std::uint64_t seed = 0;
    double oracle_gamma = 0.0;
    double ligd_gamma = 0.0;
    double gap = 0.0;  // (ligd - oracle) / |oracle|
    double evaluations = 0.0;
};

struct OracleReport {
    std::vector<OracleSeedResult> seeds;
    double bound = 0.0;
    double max_gap = -std::numeric_limits<double>::infinity();
    bool pass() const { return !seeds.empty() && max_gap <= bound; }
};

inline OracleReport oracle_check(const ScenarioConfig& cfg) {
    OracleReport rep;
    rep.bound = cfg.oracle.bound;
    for (auto s : cfg.seeds) {
        const auto sc = scenario_for(cfg, s);
        const auto bf = brute_force(sc, cfg.oracle.grid);
        const auto li = li_gd(sc, cfg.gd);
        OracleSeedResult r;
        r.seed = s;
        r.oracle_gamma = bf.gamma;
        r.ligd_gamma = li.gamma_rounded;
        r.gap = (li.gamma_rounded - bf.gamma) / std::abs(bf.gamma);
        r.evaluations = bf.evaluations;
        rep.max_gap = std::max(rep.max_gap, r.gap);
        rep.seeds.push_back(r);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Trace

/// Per-iteration utility and projected-gradient norm of every layer of one
/// li_gd run.
inline void write_trace(std::ostream& out, const OptimizationResult& r) {
    out << "layer,iter,gamma,grad_norm\n";
    for (const auto& l : r.per_layer)
        for (std::size_t it = 0; it < l.trace.size(); ++it)
            out << l.split << ',' << it << ',' << format_double(l.trace[it]) << ','
                << (it < l.grad_norms.size() ? format_double(l.grad_norms[it]) : std::string()) << '\n';
}

}  // namespace qsplit
