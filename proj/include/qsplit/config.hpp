#pragma once

// Scenario configuration files (JSON) and per-seed scenario construction.
//
// Any numeric leaf documented as a range accepts either a number or a
// two-element array [lo, hi] with lo <= hi; per-user values are drawn
// uniformly from it. The schema is documented in README.md.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsplit/baselines.hpp"
#include "qsplit/channel.hpp"
#include "qsplit/costs.hpp"
#include "qsplit/error.hpp"
#include "qsplit/ligd.hpp"
#include "qsplit/profiles.hpp"
#include "qsplit/scenario.hpp"
#include "qsplit/units.hpp"

namespace qsplit {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double draw(std::mt19937_64& rng) const {
        if (lo == hi) return lo;
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }
};

struct GradcheckSettings {
    std::size_t points = 100;
    double tolerance = 1e-5;
};

struct OracleSettings {
    OracleGrid grid;
    double bound = 0.05;  // allowed relative gap of li_gd over the optimum
};

struct ScenarioConfig {
    nlohmann::json doc;  // as loaded, after defaults are resolved
    std::filesystem::path base_dir;

    Topology topology;
    Placement placement;
    Range device_flops, device_kappa, device_cycles, device_p_min_dbm, device_p_max_dbm;
    ServerSpec server;
    ModelProfile profile;
    Weights weights;
    Range deadline;
    double steepness = 2000.0;
    double z_scale = 1.0;
    double deadline_scale = 1.0;
    double threshold_percent = 1.0;  // deadlines are divided by this
    /// When positive, every deadline becomes this multiple of the mean
    /// delay of a reference li_gd run on the configured deadlines.
    double finish_multiplier = 0.0;
    GdParams gd;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> strategies;
    std::string baseline = "device_only";
    OracleSettings oracle;
    GradcheckSettings gradcheck;
};

inline const std::vector<std::string>& known_strategies() {
    static const std::vector<std::string> s{"li_gd", "cold_gd", "device_only", "edge_only", "exhaustive_split"};
    return s;
}

namespace detail {

class Reader {
public:
    Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {}

    bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

    std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    Reader child(const char* key) const {
        static const nlohmann::json empty = nlohmann::json::object();
        if (!has(key)) return Reader(empty, at(key));
        const auto& c = j_.at(key);
        if (!c.is_object()) throw ParseError(at(key) + ": expected an object");
        return Reader(c, at(key));
    }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ParseError(at(key) + ": expected a number");
        return v.get<double>();
    }

    std::size_t count(const char* key, std::size_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ParseError(at(key) + ": expected a nonnegative integer");
        return v.get<std::size_t>();
    }

    bool flag(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ParseError(at(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string text(const char* key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ParseError(at(key) + ": expected a string");
        return v.get<std::string>();
    }

    Range range(const char* key, double fallback) const {
        if (!has(key)) return {fallback, fallback};
        const auto& v = j_.at(key);
        if (v.is_number()) return {v.get<double>(), v.get<double>()};
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ParseError(at(key) + ": expected a number or [lo, hi]");
        Range r{v[0].get<double>(), v[1].get<double>()};
        if (!(r.lo <= r.hi)) throw ValidationError(at(key) + ": range needs lo <= hi");
        return r;
    }

    const nlohmann::json& raw() const { return j_; }

private:
    const nlohmann::json& j_;
    std::string path_;
};

inline ModelProfile scaled_workload(ModelProfile p, double scale) {
    if (scale == 1.0) return p;
    for (auto& l : p.layers) l.workload_flops *= scale;
    p.unit_costs.reset();
    return p;
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".") {
    if (!doc.is_object()) throw ParseError("config: top level must be an object");
    ScenarioConfig c;
    c.doc = doc;
    c.base_dir = base_dir;
    const detail::Reader root(doc, "");

    const auto t = root.child("topology");
    c.topology.n_aps = t.count("aps", 1);
    c.topology.n_users = t.count("users", 1);
    c.topology.n_subchannels = t.count("subchannels", 1);
    c.topology.bandwidth_up = t.number("bandwidth_up_hz", c.topology.bandwidth_up);
    c.topology.bandwidth_down = t.number("bandwidth_down_hz", c.topology.bandwidth_down);
    c.topology.noise_psd_dbm = t.number("noise_psd_dbm_hz", c.topology.noise_psd_dbm);
    c.topology.pathloss_exp = t.number("pathloss_exp", c.topology.pathloss_exp);
    c.topology.cluster_cap = t.count("cluster_cap", c.topology.cluster_cap);
    c.topology.sic_threshold_up = t.number("sic_threshold_up_w", 0.0);
    c.topology.sic_threshold_down = t.number("sic_threshold_down_w", 0.0);
    validate(c.topology);

    const auto pl = root.child("placement");
    c.placement.cell_radius = pl.number("cell_radius_m", c.placement.cell_radius);
    c.placement.ap_spacing = pl.number("ap_spacing_m", c.placement.ap_spacing);
    c.placement.min_distance = pl.number("min_distance_m", c.placement.min_distance);
    c.placement.fading = pl.flag("fading", c.placement.fading);
    if (!(c.placement.cell_radius > 0.0)) throw ValidationError("placement.cell_radius_m: must be positive");
    if (!(c.placement.min_distance > 0.0)) throw ValidationError("placement.min_distance_m: must be positive");

    const DeviceSpec dd;
    const auto d = root.child("device");
    c.device_flops = d.range("flops", dd.flops);
    c.device_kappa = d.range("kappa", dd.kappa);
    c.device_cycles = d.range("cycles_per_bit", dd.cycles_per_bit);
    c.device_p_min_dbm = d.range("p_min_dbm", watt_to_dbm(dd.p_min));
    c.device_p_max_dbm = d.range("p_max_dbm", watt_to_dbm(dd.p_max));
    if (!(c.device_flops.lo > 0.0)) throw ValidationError("device.flops: must be positive");
    if (c.device_kappa.lo < 0.0) throw ValidationError("device.kappa: must be nonnegative");
    if (!(c.device_cycles.lo > 0.0)) throw ValidationError("device.cycles_per_bit: must be positive");
    if (c.device_p_min_dbm.hi > c.device_p_max_dbm.lo)
        throw ValidationError("device.p_min_dbm: must not exceed device.p_max_dbm");

    const auto s = root.child("server");
    c.server.unit_flops = s.number("unit_flops", c.server.unit_flops);
    c.server.kappa = s.number("kappa", c.server.kappa);
    c.server.cycles_per_bit = s.number("cycles_per_bit", c.server.cycles_per_bit);
    c.server.r_min = s.number("r_min", c.server.r_min);
    c.server.r_max = s.number("r_max", c.server.r_max);
    c.server.theta = s.number("theta", c.server.theta);
    c.server.P_min = dbm_to_watt(s.number("P_min_dbm", watt_to_dbm(c.server.P_min)));
    c.server.P_max = dbm_to_watt(s.number("P_max_dbm", watt_to_dbm(c.server.P_max)));
    c.server.units_per_ap = s.number("units_per_ap", c.server.units_per_ap);
    validate(c.server);

    if (!root.has("profile")) throw ValidationError("profile: required");
    const auto& pj = doc.at("profile");
    if (pj.is_string()) {
        auto path = std::filesystem::path(pj.get<std::string>());
        if (path.is_relative()) path = base_dir / path;
        if (!std::filesystem::exists(path)) throw ValidationError("profile: file '" + path.string() + "' not found");
        c.profile = load_profile(path.string());
    } else if (pj.is_object() && pj.contains("synthetic")) {
        const detail::Reader syn(pj.at("synthetic"), "profile.synthetic");
        const auto layers = syn.count("layers", 0);
        if (layers < 1) throw ValidationError("profile.synthetic.layers: must be >= 1");
        SynthOptions opt;
        opt.workload_min = syn.number("workload_min", opt.workload_min);
        opt.workload_max = syn.number("workload_max", opt.workload_max);
        opt.input_bits = syn.number("input_bits", opt.input_bits);
        opt.result_bits = syn.number("result_bits", opt.result_bits);
        c.profile = synth_profile(syn.count("seed", 1), layers, opt);
    } else if (pj.is_object()) {
        c.profile = profile_from_json(pj);
    } else {
        throw ParseError("profile: expected a path, an inline profile or {\"synthetic\": {...}}");
    }
    const double wscale = root.number("workload_scale", 1.0);
    if (!(wscale > 0.0)) throw ValidationError("workload_scale: must be positive");
    c.profile = detail::scaled_workload(std::move(c.profile), wscale);

    const auto w = root.child("weights");
    c.weights.w_t = w.number("w_t", c.weights.w_t);
    c.weights.w_r = w.number("w_r", c.weights.w_r);
    c.weights.w_q = w.number("w_q", c.weights.w_q);
    validate(c.weights);

    const auto q = root.child("qoe");
    c.deadline = q.range("deadline_s", 0.1);
    c.steepness = q.number("steepness", c.steepness);
    c.z_scale = q.number("z_scale", c.z_scale);
    c.deadline_scale = q.number("deadline_scale", 1.0);
    c.threshold_percent = q.number("threshold_percent", 1.0);
    c.finish_multiplier = q.number("finish_multiplier", 0.0);
    if (c.finish_multiplier < 0.0) throw ValidationError("qoe.finish_multiplier: must be nonnegative");
    if (!(c.deadline.lo > 0.0)) throw ValidationError("qoe.deadline_s: must be positive");
    if (!(c.steepness > 0.0)) throw ValidationError("qoe.steepness: must be positive");
    if (c.z_scale < 0.0) throw ValidationError("qoe.z_scale: must be nonnegative");
    if (!(c.deadline_scale > 0.0)) throw ValidationError("qoe.deadline_scale: must be positive");
    if (!(c.threshold_percent > 0.0 && c.threshold_percent <= 1.0))
        throw ValidationError("qoe.threshold_percent: must be in (0, 1]");

    const auto g = root.child("gd");
    c.gd.eta = g.number("eta", c.gd.eta);
    c.gd.eps = g.number("eps", c.gd.eps);
    c.gd.max_iter = g.count("max_iter", c.gd.max_iter);
    c.gd.max_backtracks = g.count("max_backtracks", c.gd.max_backtracks);
    c.gd.refine_splits = g.flag("refine_splits", c.gd.refine_splits);
    const auto mode = g.text("mode", "backtracking");
    if (mode == "backtracking") c.gd.mode = StepMode::backtracking;
    else if (mode == "fixed_step") c.gd.mode = StepMode::fixed_step;
    else throw ValidationError("gd.mode: expected 'fixed_step' or 'backtracking'");
    validate(c.gd);

    if (root.has("seeds")) {
        const auto& sj = doc.at("seeds");
        if (!sj.is_array()) throw ParseError("seeds: expected an array of integers");
        for (const auto& v : sj) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
                throw ParseError("seeds: expected nonnegative integers");
            c.seeds.push_back(v.get<std::uint64_t>());
        }
    } else {
        c.seeds = {1};
    }
    if (c.seeds.empty()) throw ValidationError("seeds: at least one seed required");

    if (root.has("strategies")) {
        const auto& sj = doc.at("strategies");
        if (!sj.is_array()) throw ParseError("strategies: expected an array of names");
        for (const auto& v : sj) {
            if (!v.is_string()) throw ParseError("strategies: expected names");
            c.strategies.push_back(v.get<std::string>());
        }
    } else {
        c.strategies = known_strategies();
    }
    for (const auto& name : c.strategies)
        if (std::find(known_strategies().begin(), known_strategies().end(), name) == known_strategies().end())
            throw ValidationError("strategies: unknown strategy '" + name + "'");
    c.baseline = root.text("baseline", c.baseline);
    if (std::find(known_strategies().begin(), known_strategies().end(), c.baseline) == known_strategies().end())
        throw ValidationError("baseline: unknown strategy '" + c.baseline + "'");

    const auto o = root.child("oracle");
    c.oracle.grid.p_points = o.count("p_points", c.oracle.grid.p_points);
    c.oracle.grid.P_points = o.count("P_points", c.oracle.grid.P_points);
    c.oracle.grid.r_points = o.count("r_points", c.oracle.grid.r_points);
    c.oracle.grid.budget = o.number("budget", c.oracle.grid.budget);
    c.oracle.bound = o.number("bound", c.oracle.bound);
    if (c.oracle.grid.p_points < 1 || c.oracle.grid.P_points < 1 || c.oracle.grid.r_points < 1)
        throw ValidationError("oracle: grids need at least one point");

    const auto gc = root.child("gradcheck");
    c.gradcheck.points = gc.count("points", c.gradcheck.points);
    c.gradcheck.tolerance = gc.number("tolerance", c.gradcheck.tolerance);
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config '" + path + "': " + e.what());
    }
    return parse_config(doc, std::filesystem::path(path).parent_path());
}

/// Channel draw and per-user parameters for one seed. Geometry, fading and
/// per-user draws use separate streams derived from the seed.
inline Scenario build_scenario(const ScenarioConfig& c, std::uint64_t seed) {
    Scenario sc;
    sc.topology = c.topology;
    sc.channel = sample_channels(c.topology, c.placement, seed);
    sc.profile = c.profile;
    sc.server = c.server;
    sc.z_scale = c.z_scale;
    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
    const std::size_t u = c.topology.n_users;
    for (std::size_t i = 0; i < u; ++i) {
        DeviceSpec d;
        d.flops = c.device_flops.draw(rng);
        d.kappa = c.device_kappa.draw(rng);
        d.cycles_per_bit = c.device_cycles.draw(rng);
        d.p_min = dbm_to_watt(c.device_p_min_dbm.draw(rng));
        d.p_max = dbm_to_watt(c.device_p_max_dbm.draw(rng));
        sc.devices.push_back(d);
        QoESpec q;
        q.q = c.deadline.draw(rng) * c.deadline_scale / c.threshold_percent;
        q.a = c.steepness;
        sc.qoe.push_back(q);
        sc.weights.push_back(c.weights);
    }
    validate(sc);
    return sc;
}

}  // namespace qsplit
