#pragma once

// Test fixtures and a scalar re-evaluation of the objective that shares no
// code with the library's evaluator.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qsplit/qsplit.hpp"

namespace qsplit::test {

inline std::string config_path(const std::string& name) { return std::string(QSPLIT_CONFIG_DIR) + "/" + name; }

/// Chain profile with every boundary admissible.
inline ModelProfile chain(std::vector<double> work, std::vector<double> out_bits, double input_bits = 1e6,
                          double result_bits = 8e3) {
    ModelProfile p;
    p.name = "chain";
    p.input_bits = input_bits;
    p.result_bits = result_bits;
    for (std::size_t i = 0; i < work.size(); ++i) {
        LayerProfile l;
        l.workload_flops = work[i];
        l.out_bits = out_bits[i];
        p.layers.push_back(l);
    }
    for (std::size_t k = 0; k <= work.size(); ++k) p.split_points.push_back(k);
    return p;
}

/// Hand-built scenario: users spread round-robin over APs, every gain
/// `gain`, 1 MHz per subchannel and noise 1e-10 W per subchannel at M = 1.
inline Scenario make_scenario(std::size_t aps, std::size_t users, std::size_t sub, ModelProfile profile,
                              double gain = 1e-9) {
    Scenario sc;
    sc.topology.n_aps = aps;
    sc.topology.n_users = users;
    sc.topology.n_subchannels = sub;
    sc.topology.bandwidth_up = 1e6 * static_cast<double>(sub);
    sc.topology.bandwidth_down = 1e6 * static_cast<double>(sub);
    sc.topology.noise_psd_dbm = -130.0;
    sc.topology.cluster_cap = 3;
    sc.channel = ChannelState(aps, users, sub);
    for (auto* v : {&sc.channel.h_up_, &sc.channel.g_up_, &sc.channel.h_down_, &sc.channel.g_down_})
        for (auto& x : *v) x = gain;
    for (std::size_t i = 0; i < users; ++i) sc.channel.assoc[i] = i % aps;
    sc.profile = std::move(profile);
    sc.devices.assign(users, DeviceSpec{});
    sc.qoe.assign(users, QoESpec{0.5, 20.0});
    sc.weights.assign(users, Weights{});
    return sc;
}

struct ScalarUser {
    double t = 0.0, e = 0.0, qoe = 0.0, u = 0.0;
};

/// SINR denominator written out directly from the interference model:
/// same-AP users decoded after i plus every active user of other APs.
inline double scalar_denominator(const Scenario& sc, const RelaxedAllocation& a, const std::vector<bool>& active,
                                 bool uplink, std::size_t i, std::size_t m) {
    const auto& ch = sc.channel;
    const std::size_t mc = sc.subchannels();
    double d = std::pow(10.0, (sc.topology.noise_psd_dbm - 30.0) / 10.0) *
               (uplink ? sc.topology.bandwidth_up : sc.topology.bandwidth_down) / static_cast<double>(mc);
    const std::size_t n = ch.assoc[i];
    for (std::size_t v = 0; v < sc.users(); ++v) {
        if (v == i || !active[v]) continue;
        const double beta = uplink ? a.beta_up[v * mc + m] : a.beta_down[v * mc + m];
        const double power = uplink ? a.p[v] : a.P[v];
        if (ch.assoc[v] == n) {
            const double gi = uplink ? ch.h_up(n, i, m) : ch.h_down(n, i, m);
            const double gv = uplink ? ch.h_up(n, v, m) : ch.h_down(n, v, m);
            // uplink decodes strong first, downlink weak first
            const bool v_later = uplink ? (gv < gi || (gv == gi && v > i)) : (gv > gi || (gv == gi && v > i));
            if (v_later) d += beta * power * (uplink ? gv : gi);
        } else {
            d += beta * power * (uplink ? ch.g_up(n, v, m) : ch.g_down(ch.assoc[v], i, m));
        }
    }
    return d;
}

inline double scalar_rate(const Scenario& sc, const RelaxedAllocation& a, const std::vector<bool>& active,
                          bool uplink, std::size_t i) {
    const std::size_t mc = sc.subchannels();
    const double b = (uplink ? sc.topology.bandwidth_up : sc.topology.bandwidth_down) / static_cast<double>(mc);
    double r = 0.0;
    for (std::size_t m = 0; m < mc; ++m) {
        const double beta = uplink ? a.beta_up[i * mc + m] : a.beta_down[i * mc + m];
        const double g = uplink ? sc.channel.h_up(sc.channel.assoc[i], i, m) : sc.channel.h_down(sc.channel.assoc[i], i, m);
        const double s = (uplink ? a.p[i] : a.P[i]) * g / scalar_denominator(sc, a, active, uplink, i, m);
        r += beta * b * std::log2(1.0 + s);
    }
    return r;
}

/// Per-user terms of the weighted objective, soft or hard QoE.
inline std::vector<ScalarUser> scalar_objective(const Scenario& sc, const std::vector<std::size_t>& splits,
                                                const RelaxedAllocation& a, bool soft = true) {
    const std::size_t u = sc.users(), f = sc.profile.depth();
    std::vector<bool> active(u);
    for (std::size_t i = 0; i < u; ++i) active[i] = splits[i] < f;
    std::vector<ScalarUser> out(u);
    for (std::size_t i = 0; i < u; ++i) {
        const auto& d = sc.devices[i];
        const auto& s = sc.server;
        double dev = 0.0, edge = 0.0;
        for (std::size_t l = 0; l < f; ++l) (l < splits[i] ? dev : edge) += sc.profile.layers[l].workload_flops;
        const double lam = std::pow(a.r[i], s.theta);
        double t = dev / d.flops + edge / (lam * s.unit_flops);
        double e = d.kappa * d.flops * d.flops * d.cycles_per_bit * dev +
                   s.kappa * std::pow(lam * s.unit_flops, 2) * s.cycles_per_bit * edge;
        if (active[i]) {
            const double bits = splits[i] == 0 ? sc.profile.input_bits : sc.profile.layers[splits[i] - 1].out_bits;
            const double tu = bits / scalar_rate(sc, a, active, true, i);
            const double td = sc.profile.result_bits / scalar_rate(sc, a, active, false, i);
            t += tu + td;
            e += a.p[i] * tu + a.P[i] * td;
        }
        const auto& q = sc.qoe[i];
        double qoe;
        if (soft) {
            const double r = 1.0 / (1.0 + std::exp(-q.a * (t / q.q - 1.0)));
            qoe = (t - q.q) * r + sc.z_scale * r;
        } else {
            qoe = t > q.q ? (t - q.q) + sc.z_scale : 0.0;
        }
        const auto& w = sc.weights[i];
        out[i] = {t, e, qoe, w.w_t * t + w.w_r * (e + lam) + w.w_q * qoe};
    }
    return out;
}

inline double scalar_gamma(const Scenario& sc, const std::vector<std::size_t>& splits, const RelaxedAllocation& a,
                           bool soft = true) {
    double g = 0.0;
    for (const auto& x : scalar_objective(sc, splits, a, soft)) g += x.u;
    return g;
}

}  // namespace qsplit::test
