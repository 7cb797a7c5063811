#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qsplit/channel.hpp"
#include "qsplit/costs.hpp"
#include "qsplit/error.hpp"
#include "qsplit/profiles.hpp"

namespace qsplit {

struct Weights {
    double w_t = 1.0 / 3.0;  // delay
    double w_r = 1.0 / 3.0;  // resource (energy + lambda)
    double w_q = 1.0 / 3.0;  // QoE

    Weights scaled(double c) const { return {w_t * c, w_r * c, w_q * c}; }
};

inline void validate(const Weights& w, bool require_unit_sum = true) {
    if (w.w_t < 0.0 || w.w_r < 0.0 || w.w_q < 0.0) throw ValidationError("weights: must be nonnegative");
    if (require_unit_sum && std::abs(w.w_t + w.w_r + w.w_q - 1.0) > 1e-12)
        throw ValidationError("weights: must sum to 1");
}

/// Everything fixed before optimization: network, channel draw, model and
/// per-user specs.
struct Scenario {
    Topology topology;
    ChannelState channel;
    ModelProfile profile;
    std::vector<DeviceSpec> devices;  // per user
    ServerSpec server;
    std::vector<QoESpec> qoe;         // per user
    std::vector<Weights> weights;     // per user
    double z_scale = 1.0;

    std::size_t users() const { return topology.n_users; }
    std::size_t subchannels() const { return topology.n_subchannels; }
    std::size_t full_device() const { return profile.depth(); }
};

/// `unit_weight_sum` is relaxed when checking argmin invariance under
/// rescaled weights.
inline void validate(const Scenario& sc, bool unit_weight_sum = true) {
    validate(sc.topology);
    validate(sc.channel);
    validate(sc.profile);
    validate(sc.server);
    const std::size_t u = sc.users();
    if (sc.channel.n_users != u || sc.channel.n_aps != sc.topology.n_aps ||
        sc.channel.n_sub != sc.topology.n_subchannels)
        throw ValidationError("channel: dimensions do not match topology");
    if (sc.devices.size() != u) throw ValidationError("devices: one spec per user required");
    if (sc.qoe.size() != u) throw ValidationError("qoe: one spec per user required");
    if (sc.weights.size() != u) throw ValidationError("weights: one triple per user required");
    for (const auto& d : sc.devices) validate(d);
    for (const auto& q : sc.qoe) validate(q);
    for (const auto& w : sc.weights) validate(w, unit_weight_sum);
    if (sc.z_scale < 0.0) throw ValidationError("qoe.z_scale: must be nonnegative");
}

/// Relaxed decision variables: per-user subchannel shares on both links,
/// powers and compute units.
struct RelaxedAllocation {
    std::size_t n_users = 0;
    std::size_t n_sub = 0;
    std::vector<double> beta_up;    // U x M
    std::vector<double> beta_down;  // U x M
    std::vector<double> p;          // uplink power, W
    std::vector<double> P;          // downlink power, W
    std::vector<double> r;          // compute units

    RelaxedAllocation() = default;
    RelaxedAllocation(std::size_t users, std::size_t sub)
        : n_users(users),
          n_sub(sub),
          beta_up(users * sub, 0.0),
          beta_down(users * sub, 0.0),
          p(users, 0.0),
          P(users, 0.0),
          r(users, 0.0) {}

    double& up(std::size_t i, std::size_t m) { return beta_up[i * n_sub + m]; }
    double& down(std::size_t i, std::size_t m) { return beta_down[i * n_sub + m]; }
    double up(std::size_t i, std::size_t m) const { return beta_up[i * n_sub + m]; }
    double down(std::size_t i, std::size_t m) const { return beta_down[i * n_sub + m]; }

    std::size_t size() const { return 2 * n_users * n_sub + 3 * n_users; }

    /// Flat view in a fixed order: beta_up, beta_down, p, P, r.
    double& operator[](std::size_t k) {
        const std::size_t um = n_users * n_sub;
        if (k < um) return beta_up[k];
        k -= um;
        if (k < um) return beta_down[k];
        k -= um;
        if (k < n_users) return p[k];
        k -= n_users;
        if (k < n_users) return P[k];
        return r[k - n_users];
    }
    double operator[](std::size_t k) const { return const_cast<RelaxedAllocation&>(*this)[k]; }

    bool operator==(const RelaxedAllocation&) const = default;
};

/// Gradient shares the allocation's layout.
using AllocationGradient = RelaxedAllocation;

/// Integer subchannel assignment plus continuous powers and compute units.
struct RoundedAllocation {
    std::vector<std::size_t> up;    // subchannel per user
    std::vector<std::size_t> down;  // subchannel per user
    std::vector<double> p, P, r;

    RelaxedAllocation relaxed(std::size_t n_sub) const {
        RelaxedAllocation a(up.size(), n_sub);
        for (std::size_t i = 0; i < up.size(); ++i) {
            a.up(i, up[i]) = 1.0;
            a.down(i, down[i]) = 1.0;
        }
        a.p = p;
        a.P = P;
        a.r = r;
        return a;
    }
};

/// Information-free feasible start: uniform shares, box midpoints.
inline RelaxedAllocation cold_init(const Scenario& sc) {
    RelaxedAllocation a(sc.users(), sc.subchannels());
    const double share = 1.0 / static_cast<double>(sc.subchannels());
    std::fill(a.beta_up.begin(), a.beta_up.end(), share);
    std::fill(a.beta_down.begin(), a.beta_down.end(), share);
    for (std::size_t i = 0; i < sc.users(); ++i) {
        a.p[i] = 0.5 * (sc.devices[i].p_min + sc.devices[i].p_max);
        a.P[i] = 0.5 * (sc.server.P_min + sc.server.P_max);
        a.r[i] = 0.5 * (sc.server.r_min + sc.server.r_max);
    }
    return a;
}

inline bool is_feasible(const Scenario& sc, const RelaxedAllocation& a, double tol = 1e-9) {
    if (a.n_users != sc.users() || a.n_sub != sc.subchannels()) return false;
    for (std::size_t i = 0; i < a.n_users; ++i) {
        double su = 0.0, sd = 0.0;
        for (std::size_t m = 0; m < a.n_sub; ++m) {
            if (a.up(i, m) < -tol || a.up(i, m) > 1.0 + tol) return false;
            if (a.down(i, m) < -tol || a.down(i, m) > 1.0 + tol) return false;
            su += a.up(i, m);
            sd += a.down(i, m);
        }
        if (std::abs(su - 1.0) > 1e-6 || std::abs(sd - 1.0) > 1e-6) return false;
        const auto& d = sc.devices[i];
        if (a.p[i] < d.p_min - tol || a.p[i] > d.p_max + tol) return false;
        if (a.P[i] < sc.server.P_min - tol || a.P[i] > sc.server.P_max + tol) return false;
        if (a.r[i] < sc.server.r_min - tol || a.r[i] > sc.server.r_max + tol) return false;
    }
    return true;
}

/// Strict interior: every share in (0,1) and every box variable off its
/// bounds. Degenerate boxes (min == max) count as interior.
inline bool is_interior(const Scenario& sc, const RelaxedAllocation& a, double margin = 1e-9) {
    if (!is_feasible(sc, a)) return false;
    auto inside = [&](double x, double lo, double hi) {
        return lo == hi || (x > lo + margin && x < hi - margin);
    };
    for (std::size_t i = 0; i < a.n_users; ++i) {
        if (a.n_sub > 1) {
            for (std::size_t m = 0; m < a.n_sub; ++m)
                if (!inside(a.up(i, m), 0.0, 1.0) || !inside(a.down(i, m), 0.0, 1.0)) return false;
        }
        if (!inside(a.p[i], sc.devices[i].p_min, sc.devices[i].p_max)) return false;
        if (!inside(a.P[i], sc.server.P_min, sc.server.P_max)) return false;
        if (!inside(a.r[i], sc.server.r_min, sc.server.r_max)) return false;
    }
    return true;
}

/// Users whose best achievable received power misses a SIC threshold are
/// pinned to full-device execution.
inline std::vector<std::uint8_t> sic_pinned(const Scenario& sc) {
    std::vector<std::uint8_t> pinned(sc.users(), 0);
    const auto& ch = sc.channel;
    for (std::size_t i = 0; i < sc.users(); ++i) {
        double best_up = 0.0, best_down = 0.0;
        for (std::size_t m = 0; m < sc.subchannels(); ++m) {
            best_up = std::max(best_up, ch.own_gain(Link::up, i, m));
            best_down = std::max(best_down, ch.own_gain(Link::down, i, m));
        }
        const bool ok = sc.devices[i].p_max * best_up > sc.topology.sic_threshold_up &&
                        sc.server.P_max * best_down > sc.topology.sic_threshold_down;
        pinned[i] = ok ? 0 : 1;
    }
    return pinned;
}

/// Per-user split vector for a shared candidate split k.
inline std::vector<std::size_t> shared_splits(const Scenario& sc, std::size_t k) {
    require_split_point(sc.profile, k);
    std::vector<std::size_t> s(sc.users(), k);
    const auto pinned = sic_pinned(sc);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (pinned[i]) s[i] = sc.full_device();
    return s;
}

}  // namespace qsplit
