#pragma once

// Chain-topology DNN profiles.
//
// Split index convention: k in {0..F}. Layers 1..k run on the device and
// k+1..F on the edge, so k = 0 offloads everything and k = F keeps the whole
// model local. The uplink payload at k = 0 is the raw input (`input_bits`).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsplit/error.hpp"

namespace qsplit {

struct LayerProfile {
    double workload_flops = 0.0;
    std::uint32_t conv_count = 0;
    std::uint32_t pool_count = 0;
    std::uint32_t relu_count = 0;
    double out_bits = 0.0;

    bool operator==(const LayerProfile&) const = default;
};

/// Per-type FLOP costs. When present, each layer's workload must equal
/// conv*f_conv + pool*f_pool + relu*f_relu.
struct UnitCosts {
    double conv = 0.0;
    double pool = 0.0;
    double relu = 0.0;

    bool operator==(const UnitCosts&) const = default;
};

struct ModelProfile {
    std::string name;
    double input_bits = 0.0;
    double result_bits = 0.0;
    std::vector<LayerProfile> layers;
    std::vector<std::size_t> split_points;
    std::optional<UnitCosts> unit_costs;

    std::size_t depth() const noexcept { return layers.size(); }

    /// Z: total workload, independent of the split.
    double total_workload() const {
        double z = 0.0;
        for (const auto& l : layers) z += l.workload_flops;
        return z;
    }

    bool is_split_point(std::size_t k) const {
        for (auto s : split_points)
            if (s == k) return true;
        return false;
    }

    bool operator==(const ModelProfile&) const = default;
};

struct WorkloadSplit {
    double device_flops = 0.0;
    double edge_flops = 0.0;
};

inline void validate(const ModelProfile& p) {
    const std::size_t f = p.depth();
    if (f == 0) throw ValidationError("layers: profile has no layers");
    if (!(p.input_bits > 0.0) || !std::isfinite(p.input_bits))
        throw ValidationError("input_bits: must be positive");
    if (!(p.result_bits > 0.0) || !std::isfinite(p.result_bits))
        throw ValidationError("result_bits: must be positive");
    for (std::size_t i = 0; i < f; ++i) {
        const auto& l = p.layers[i];
        const std::string path = "layers[" + std::to_string(i) + "]";
        if (!(l.workload_flops > 0.0) || !std::isfinite(l.workload_flops))
            throw ValidationError(path + ".workload_flops: must be positive");
        if (!(l.out_bits > 0.0) || !std::isfinite(l.out_bits))
            throw ValidationError(path + ".out_bits: must be positive");
        if (p.unit_costs) {
            const auto& u = *p.unit_costs;
            const double expect = l.conv_count * u.conv + l.pool_count * u.pool + l.relu_count * u.relu;
            if (std::abs(expect - l.workload_flops) > 1e-9 * std::max(1.0, std::abs(expect)))
                throw ValidationError(path + ".workload_flops: does not match composition counts");
        }
    }
    const auto& sp = p.split_points;
    if (sp.empty() || sp.front() != 0 || sp.back() != f)
        throw ValidationError("split_points: must contain 0 and " + std::to_string(f));
    for (std::size_t i = 1; i < sp.size(); ++i)
        if (sp[i] <= sp[i - 1]) throw ValidationError("split_points: must be strictly increasing");
}

inline void require_split_point(const ModelProfile& p, std::size_t k) {
    if (!p.is_split_point(k))
        throw ValidationError("split index " + std::to_string(k) + " is not admissible for profile '" +
                              p.name + "'");
}

/// Prefix-sum of workloads up to layer k, and the remainder.
inline WorkloadSplit cumulative_workload(const ModelProfile& p, std::size_t k) {
    require_split_point(p, k);
    double device = 0.0;
    for (std::size_t i = 0; i < k; ++i) device += p.layers[i].workload_flops;
    return {device, p.total_workload() - device};
}

/// Bits crossing the uplink when splitting at k; 0 for the full-device split.
inline double intermediate_bits(const ModelProfile& p, std::size_t k) {
    require_split_point(p, k);
    if (k == p.depth()) return 0.0;
    if (k == 0) return p.input_bits;
    return p.layers[k - 1].out_bits;
}

// ---------------------------------------------------------------------------
// Serialization. The on-disk format is a JSON object:
//
//   { "name": str, "input_bits": num, "result_bits": num,
//     "layers": [ { "workload_flops": num, "conv_count": int,
//                   "pool_count": int, "relu_count": int, "out_bits": num } ],
//     "split_points": [int],
//     "unit_costs": { "conv": num, "pool": num, "relu": num }   // optional
//   }
//
// Doubles are written with round-trip precision so load(save(p)) == p.

inline nlohmann::json to_json(const ModelProfile& p) {
    nlohmann::json j;
    j["name"] = p.name;
    j["input_bits"] = p.input_bits;
    j["result_bits"] = p.result_bits;
    auto layers = nlohmann::json::array();
    for (const auto& l : p.layers) {
        layers.push_back({{"workload_flops", l.workload_flops},
                          {"conv_count", l.conv_count},
                          {"pool_count", l.pool_count},
                          {"relu_count", l.relu_count},
                          {"out_bits", l.out_bits}});
    }
    j["layers"] = std::move(layers);
    j["split_points"] = p.split_points;
    if (p.unit_costs)
        j["unit_costs"] = {{"conv", p.unit_costs->conv},
                           {"pool", p.unit_costs->pool},
                           {"relu", p.unit_costs->relu}};
    return j;
}

inline ModelProfile profile_from_json(const nlohmann::json& j) {
    ModelProfile p;
    try {
        p.name = j.at("name").get<std::string>();
        p.input_bits = j.at("input_bits").get<double>();
        p.result_bits = j.at("result_bits").get<double>();
        for (const auto& l : j.at("layers")) {
            LayerProfile lp;
            lp.workload_flops = l.at("workload_flops").get<double>();
            lp.conv_count = l.value("conv_count", 0u);
            lp.pool_count = l.value("pool_count", 0u);
            lp.relu_count = l.value("relu_count", 0u);
            lp.out_bits = l.at("out_bits").get<double>();
            p.layers.push_back(lp);
        }
        for (const auto& s : j.at("split_points")) {
            const auto v = s.get<long long>();
            if (v < 0) throw ValidationError("split_points: negative index");
            p.split_points.push_back(static_cast<std::size_t>(v));
        }
        if (j.contains("unit_costs")) {
            const auto& u = j.at("unit_costs");
            p.unit_costs = UnitCosts{u.at("conv").get<double>(), u.at("pool").get<double>(),
                                     u.at("relu").get<double>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("profile: ") + e.what());
    }
    validate(p);
    return p;
}

inline ModelProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("profile: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("profile '" + path + "': " + e.what());
    }
    return profile_from_json(j);
}

inline void save_profile(const ModelProfile& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("profile: cannot write '" + path + "'");
    out << to_json(p).dump(2) << '\n';
}

// ---------------------------------------------------------------------------

struct SynthOptions {
    double workload_min = 5e7;
    double workload_max = 4e8;
    double input_bits = 8.0 * 224 * 224 * 3;
    double result_bits = 8.0 * 1000;
    /// Per-layer multiplicative change of the activation size.
    double shrink_min = 0.35;
    double shrink_max = 1.15;
};

/// Random CNN-like chain: activations mostly shrink with depth, every
/// boundary is admissible.
inline ModelProfile synth_profile(std::uint64_t seed, std::size_t layers, const SynthOptions& opt = {}) {
    if (layers == 0) throw ValidationError("synth_profile: layer count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> work(opt.workload_min, opt.workload_max);
    std::uniform_real_distribution<double> shrink(opt.shrink_min, opt.shrink_max);

    ModelProfile p;
    p.name = "synthetic-" + std::to_string(layers) + "-s" + std::to_string(seed);
    p.input_bits = opt.input_bits;
    p.result_bits = opt.result_bits;
    double act = opt.input_bits;
    for (std::size_t i = 0; i < layers; ++i) {
        LayerProfile l;
        l.workload_flops = work(rng);
        l.conv_count = 1;
        l.relu_count = 1;
        l.pool_count = (i % 3 == 2) ? 1 : 0;
        act = std::max(opt.result_bits, act * shrink(rng));
        l.out_bits = act;
        p.layers.push_back(l);
    }
    for (std::size_t k = 0; k <= layers; ++k) p.split_points.push_back(k);
    validate(p);
    return p;
}

}  // namespace qsplit
