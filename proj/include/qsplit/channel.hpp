#pragma once

// NOMA topology, channel state, SIC ordering and SINR/rate evaluation for
// uplink and downlink with intra-cell and inter-cell interference.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/units.hpp"

namespace qsplit {

enum class Link { up, down };

struct Topology {
    std::size_t n_aps = 1;
    std::size_t n_users = 1;
    std::size_t n_subchannels = 1;
    double bandwidth_up = 10e6;    // Hz
    double bandwidth_down = 10e6;  // Hz
    double noise_psd_dbm = -174.0; // dBm/Hz
    double pathloss_exp = 5.0;
    std::size_t cluster_cap = 3;
    double sic_threshold_up = 0.0;    // W
    double sic_threshold_down = 0.0;  // W

    double subchannel_bandwidth(Link l) const {
        return (l == Link::up ? bandwidth_up : bandwidth_down) / static_cast<double>(n_subchannels);
    }

    /// sigma^2 on one subchannel.
    double noise_power(Link l) const { return dbm_to_watt(noise_psd_dbm) * subchannel_bandwidth(l); }
};

inline void validate(const Topology& t) {
    if (t.n_aps < 1) throw ValidationError("topology.aps: must be >= 1");
    if (t.n_users < 1) throw ValidationError("topology.users: must be >= 1");
    if (t.n_subchannels < 1) throw ValidationError("topology.subchannels: must be >= 1");
    if (!(t.bandwidth_up > 0.0)) throw ValidationError("topology.bandwidth_up_hz: must be positive");
    if (!(t.bandwidth_down > 0.0)) throw ValidationError("topology.bandwidth_down_hz: must be positive");
    if (t.cluster_cap < 1) throw ValidationError("topology.cluster_cap: must be >= 1");
    if (!(t.pathloss_exp > 0.0)) throw ValidationError("topology.pathloss_exp: must be positive");
    if (t.sic_threshold_up < 0.0 || t.sic_threshold_down < 0.0)
        throw ValidationError("topology.sic_threshold: must be nonnegative");
}

/// Power gains |.|^2 indexed [ap][user][subchannel].
///
/// h_up(n,i,m):   device i -> AP n, used when i is served by n.
/// g_up(n,t,m):   device t -> AP n, used when t is served by another AP.
/// h_down(j,i,k): AP j -> device i, used when i is served by j.
/// g_down(x,i,k): AP x -> device i, used when x is not i's AP.
struct ChannelState {
    std::size_t n_aps = 0;
    std::size_t n_users = 0;
    std::size_t n_sub = 0;
    std::vector<double> h_up_, g_up_, h_down_, g_down_;
    std::vector<std::size_t> assoc;

    ChannelState() = default;
    ChannelState(std::size_t aps, std::size_t users, std::size_t sub)
        : n_aps(aps),
          n_users(users),
          n_sub(sub),
          h_up_(aps * users * sub, 1.0),
          g_up_(aps * users * sub, 1.0),
          h_down_(aps * users * sub, 1.0),
          g_down_(aps * users * sub, 1.0),
          assoc(users, 0) {}

    std::size_t index(std::size_t ap, std::size_t user, std::size_t sub) const {
        return (ap * n_users + user) * n_sub + sub;
    }

    double& h_up(std::size_t n, std::size_t i, std::size_t m) { return h_up_[index(n, i, m)]; }
    double& g_up(std::size_t n, std::size_t i, std::size_t m) { return g_up_[index(n, i, m)]; }
    double& h_down(std::size_t n, std::size_t i, std::size_t m) { return h_down_[index(n, i, m)]; }
    double& g_down(std::size_t n, std::size_t i, std::size_t m) { return g_down_[index(n, i, m)]; }
    double h_up(std::size_t n, std::size_t i, std::size_t m) const { return h_up_[index(n, i, m)]; }
    double g_up(std::size_t n, std::size_t i, std::size_t m) const { return g_up_[index(n, i, m)]; }
    double h_down(std::size_t n, std::size_t i, std::size_t m) const { return h_down_[index(n, i, m)]; }
    double g_down(std::size_t n, std::size_t i, std::size_t m) const { return g_down_[index(n, i, m)]; }

    /// Signal gain of user i on subchannel m through its serving AP.
    double own_gain(Link l, std::size_t i, std::size_t m) const {
        return l == Link::up ? h_up(assoc[i], i, m) : h_down(assoc[i], i, m);
    }

    std::vector<std::size_t> users_of(std::size_t ap) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n_users; ++i)
            if (assoc[i] == ap) out.push_back(i);
        return out;
    }
};

inline void validate(const ChannelState& s) {
    auto check = [](const std::vector<double>& v, const char* name) {
        for (double x : v)
            if (!(x > 0.0) || !std::isfinite(x))
                throw ValidationError(std::string("channel.") + name + ": gains must be positive and finite");
    };
    check(s.h_up_, "h_up");
    check(s.g_up_, "g_up");
    check(s.h_down_, "h_down");
    check(s.g_down_, "g_down");
    if (s.assoc.size() != s.n_users) throw ValidationError("channel.assoc: size mismatch");
    for (auto a : s.assoc)
        if (a >= s.n_aps) throw ValidationError("channel.assoc: AP index out of range");
}

struct Placement {
    double cell_radius = 100.0;   // m, users dropped uniformly in a disc around their home AP
    double ap_spacing = 200.0;    // m, APs on a line
    double min_distance = 10.0;   // m
    bool fading = true;           // Rayleigh |h|^2 ~ Exp(1) on top of path loss
};

struct Positions {
    std::vector<std::pair<double, double>> aps;
    std::vector<std::pair<double, double>> users;
};

/// APs on a line; user i is dropped around AP (i mod N).
inline Positions drop_positions(const Topology& t, const Placement& pl, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Positions pos;
    for (std::size_t n = 0; n < t.n_aps; ++n) pos.aps.emplace_back(pl.ap_spacing * static_cast<double>(n), 0.0);
    for (std::size_t i = 0; i < t.n_users; ++i) {
        const auto& home = pos.aps[i % t.n_aps];
        const double radius = pl.cell_radius * std::sqrt(unit(rng));
        const double angle = 2.0 * M_PI * unit(rng);
        pos.users.emplace_back(home.first + radius * std::cos(angle), home.second + radius * std::sin(angle));
    }
    return pos;
}

/// Gains from explicit positions: d^-alpha times an Exp(1) fading draw per
/// link and subchannel. Association is by maximum average gain.
inline ChannelState channels_from_positions(const Topology& t, const Placement& pl, const Positions& pos,
                                            std::uint64_t seed) {
    validate(t);
    ChannelState s(t.n_aps, t.n_users, t.n_subchannels);
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> fade(1.0);
    auto draw = [&] { return pl.fading ? fade(rng) : 1.0; };

    std::vector<double> mean_gain(t.n_aps * t.n_users);
    for (std::size_t n = 0; n < t.n_aps; ++n) {
        for (std::size_t i = 0; i < t.n_users; ++i) {
            const double dx = pos.aps[n].first - pos.users[i].first;
            const double dy = pos.aps[n].second - pos.users[i].second;
            const double d = std::max(pl.min_distance, std::hypot(dx, dy));
            const double pathloss = std::pow(d, -t.pathloss_exp);
            mean_gain[n * t.n_users + i] = pathloss;
            for (std::size_t m = 0; m < t.n_subchannels; ++m) {
                const double up = pathloss * draw();
                const double down = pathloss * draw();
                s.h_up(n, i, m) = up;
                s.g_up(n, i, m) = up;
                s.h_down(n, i, m) = down;
                s.g_down(n, i, m) = down;
            }
        }
    }
    for (std::size_t i = 0; i < t.n_users; ++i) {
        std::size_t best = 0;
        for (std::size_t n = 1; n < t.n_aps; ++n)
            if (mean_gain[n * t.n_users + i] > mean_gain[best * t.n_users + i]) best = n;
        s.assoc[i] = best;
    }
    return s;
}

inline ChannelState sample_channels(const Topology& t, const Placement& pl, std::uint64_t seed) {
    // Separate streams for geometry and fading so toggling fading keeps positions.
    const auto pos = drop_positions(t, pl, seed);
    return channels_from_positions(t, pl, pos, seed ^ 0x9e3779b97f4a7c15ULL);
}

// ---------------------------------------------------------------------------
// SIC ordering

/// True when user a is decoded before user b on (ap, m). Uplink decodes in
/// descending gain, downlink in ascending gain; ties go to the lower id.
inline bool decoded_before(Link l, const ChannelState& s, std::size_t ap, std::size_t m, std::size_t a,
                           std::size_t b) {
    const double ga = l == Link::up ? s.h_up(ap, a, m) : s.h_down(ap, a, m);
    const double gb = l == Link::up ? s.h_up(ap, b, m) : s.h_down(ap, b, m);
    if (ga != gb) return l == Link::up ? ga > gb : ga < gb;
    return a < b;
}

inline std::vector<std::size_t> sic_order(Link l, std::vector<std::size_t> cluster, const ChannelState& s,
                                          std::size_t ap, std::size_t m) {
    std::sort(cluster.begin(), cluster.end(),
              [&](std::size_t a, std::size_t b) { return decoded_before(l, s, ap, m, a, b); });
    return cluster;
}

inline std::vector<std::size_t> sic_order_up(std::vector<std::size_t> cluster, const ChannelState& s,
                                             std::size_t ap, std::size_t m) {
    return sic_order(Link::up, std::move(cluster), s, ap, m);
}

inline std::vector<std::size_t> sic_order_down(std::vector<std::size_t> cluster, const ChannelState& s,
                                               std::size_t ap, std::size_t m) {
    return sic_order(Link::down, std::move(cluster), s, ap, m);
}

// ---------------------------------------------------------------------------
// SINR and rate

/// Per-link transmit state of every user: relaxed subchannel shares
/// (row-major U x M), transmit powers, and whether the user transmits at all.
struct LinkLoad {
    std::span<const double> beta;
    std::span<const double> power;
    std::span<const std::uint8_t> active;

    double share(std::size_t i, std::size_t m, std::size_t n_sub) const { return beta[i * n_sub + m]; }
};

/// Gain through which user v's transmission reaches victim i on subchannel
/// m, or 0 when v does not interfere with i (decoded earlier, or itself).
inline double interference_gain(Link l, const ChannelState& s, std::size_t i, std::size_t v, std::size_t m) {
    if (v == i) return 0.0;
    const std::size_t ap_i = s.assoc[i];
    const std::size_t ap_v = s.assoc[v];
    if (ap_v == ap_i) {
        // intra-cell: only users decoded after i remain as interference
        if (!decoded_before(l, s, ap_i, m, i, v)) return 0.0;
        return l == Link::up ? s.h_up(ap_i, v, m) : s.h_down(ap_i, i, m);
    }
    return l == Link::up ? s.g_up(ap_i, v, m) : s.g_down(ap_v, i, m);
}

/// Interference-plus-noise seen by user i on subchannel m.
template <std::floating_point T = double>
T sinr_denominator(Link l, const ChannelState& s, const Topology& t, const LinkLoad& load, std::size_t i,
                   std::size_t m) {
    T d = static_cast<T>(t.noise_power(l));
    for (std::size_t v = 0; v < s.n_users; ++v) {
        if (!load.active[v]) continue;
        const double c = interference_gain(l, s, i, v, m);
        if (c == 0.0) continue;
        d += static_cast<T>(load.share(v, m, s.n_sub)) * static_cast<T>(load.power[v]) * static_cast<T>(c);
    }
    return d;
}

template <std::floating_point T = double>
T sinr(Link l, const ChannelState& s, const Topology& t, const LinkLoad& load, std::size_t i, std::size_t m) {
    const T signal = static_cast<T>(load.power[i]) * static_cast<T>(s.own_gain(l, i, m));
    return signal / sinr_denominator<T>(l, s, t, load, i, m);
}

template <std::floating_point T = double>
T uplink_sinr(const ChannelState& s, const Topology& t, const LinkLoad& load, std::size_t i, std::size_t m) {
    return sinr<T>(Link::up, s, t, load, i, m);
}

template <std::floating_point T = double>
T downlink_sinr(const ChannelState& s, const Topology& t, const LinkLoad& load, std::size_t i, std::size_t m) {
    return sinr<T>(Link::down, s, t, load, i, m);
}

/// beta * (B/M) * log2(1 + SINR) for one subchannel.
template <std::floating_point T = double>
T subchannel_rate(T beta, double sub_bandwidth, T sinr_value) {
    if (beta == T(0)) return T(0);
    return beta * static_cast<T>(sub_bandwidth) * std::log2(T(1) + sinr_value);
}

/// Achievable rate of user i summed over its relaxed subchannel shares.
template <std::floating_point T = double>
T rate(Link l, const ChannelState& s, const Topology& t, const LinkLoad& load, std::size_t i) {
    T r = 0;
    const double b = t.subchannel_bandwidth(l);
    for (std::size_t m = 0; m < s.n_sub; ++m) {
        const T beta = static_cast<T>(load.share(i, m, s.n_sub));
        if (beta == T(0)) continue;
        r += subchannel_rate<T>(beta, b, sinr<T>(l, s, t, load, i, m));
    }
    return r;
}

template <std::floating_point T = double>
T uplink_rate(const ChannelState& s, const Topology& t, const LinkLoad& load, std::size_t i) {
    return rate<T>(Link::up, s, t, load, i);
}

template <std::floating_point T = double>
T downlink_rate(const ChannelState& s, const Topology& t, const LinkLoad& load, std::size_t i) {
    return rate<T>(Link::down, s, t, load, i);
}

/// Received power on the user's dominant subchannel must exceed the SIC
/// threshold on both links; otherwise the device computes the whole model.
inline bool sic_feasible(const ChannelState& s, const Topology& t, const LinkLoad& up, const LinkLoad& down,
                         std::size_t i) {
    auto dominant = [&](const LinkLoad& load) {
        std::size_t best = 0;
        for (std::size_t m = 1; m < s.n_sub; ++m)
            if (load.share(i, m, s.n_sub) > load.share(i, best, s.n_sub)) best = m;
        return best;
    };
    const std::size_t mu = dominant(up);
    const std::size_t kd = dominant(down);
    return up.power[i] * s.own_gain(Link::up, i, mu) > t.sic_threshold_up &&
           down.power[i] * s.own_gain(Link::down, i, kd) > t.sic_threshold_down;
}

}  // namespace qsplit
