#pragma once

// Weighted objective over relaxed allocations, its analytic gradient, and
// projection back onto the feasible set.
//
// Per user i with split k_i:
//   U_i = w_t T_i + w_r (E_i + lambda(r_i)) + w_q (dct_soft_i + z_scale R_i)
// and Gamma = sum_i U_i. A user transmits (and interferes) only when
// k_i < F. Its rate sums beta-weighted subchannel rates, so a one-hot
// share vector gives back the single-subchannel rate.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "qsplit/channel.hpp"
#include "qsplit/costs.hpp"
#include "qsplit/error.hpp"
#include "qsplit/scenario.hpp"

namespace qsplit {

enum class QoeMode {
    soft,  // sigmoid surrogate, differentiable
    hard   // max(0, T - q) and the 0/1 exceed indicator
};

using SplitVector = std::vector<std::size_t>;

namespace detail {

inline std::vector<std::uint8_t> active_users(const Scenario& sc, const SplitVector& splits) {
    std::vector<std::uint8_t> active(sc.users());
    for (std::size_t i = 0; i < sc.users(); ++i) active[i] = splits[i] < sc.full_device() ? 1 : 0;
    return active;
}

template <std::floating_point T>
struct LinkState {
    std::vector<T> denom;  // U x M
    std::vector<T> sinr;   // U x M
    std::vector<T> rate;   // U
};

template <std::floating_point T>
LinkState<T> evaluate_link(Link l, const Scenario& sc, const LinkLoad& load) {
    const auto& ch = sc.channel;
    const std::size_t u = sc.users(), m_count = sc.subchannels();
    const double b = sc.topology.subchannel_bandwidth(l);
    LinkState<T> st;
    st.denom.assign(u * m_count, T(0));
    st.sinr.assign(u * m_count, T(0));
    st.rate.assign(u, T(0));
    for (std::size_t i = 0; i < u; ++i) {
        if (!load.active[i]) continue;
        for (std::size_t m = 0; m < m_count; ++m) {
            const T d = sinr_denominator<T>(l, ch, sc.topology, load, i, m);
            const T y = static_cast<T>(load.power[i]) * static_cast<T>(ch.own_gain(l, i, m)) / d;
            st.denom[i * m_count + m] = d;
            st.sinr[i * m_count + m] = y;
            st.rate[i] += subchannel_rate<T>(static_cast<T>(load.share(i, m, m_count)), b, y);
        }
    }
    return st;
}

template <std::floating_point T>
struct UserTerms {
    T t_device{}, t_server{}, t_up{}, t_down{}, t_total{};
    T e_device{}, e_up{}, e_down{}, e_server{}, e_total{};
    T lambda{}, lambda_prime{};
    T indicator{}, dct_soft{};
    double dct_hard = 0.0;
    double device_flops = 0.0, edge_flops = 0.0, up_bits = 0.0, down_bits = 0.0;
    bool infeasible = false;
    T utility{};
};

template <std::floating_point T>
struct Evaluation {
    std::vector<std::uint8_t> active;
    LinkState<T> up, down;
    std::vector<UserTerms<T>> users;
    T gamma{};
    bool infeasible = false;
};

template <std::floating_point T>
Evaluation<T> evaluate(const Scenario& sc, const SplitVector& splits, const RelaxedAllocation& a, QoeMode mode) {
    if (splits.size() != sc.users()) throw ValidationError("splits: one split index per user required");
    Evaluation<T> ev;
    ev.active = active_users(sc, splits);
    const LinkLoad up{a.beta_up, a.p, ev.active};
    const LinkLoad down{a.beta_down, a.P, ev.active};
    ev.up = evaluate_link<T>(Link::up, sc, up);
    ev.down = evaluate_link<T>(Link::down, sc, down);
    ev.users.resize(sc.users());
    const auto& srv = sc.server;
    for (std::size_t i = 0; i < sc.users(); ++i) {
        auto& ut = ev.users[i];
        const auto& dev = sc.devices[i];
        const auto& w = sc.weights[i];
        const auto work = cumulative_workload(sc.profile, splits[i]);
        ut.device_flops = work.device_flops;
        ut.edge_flops = work.edge_flops;
        const T r = static_cast<T>(a.r[i]);
        ut.lambda = compensation<T>(r, srv.theta);
        ut.lambda_prime = compensation_derivative<T>(r, srv.theta);
        ut.t_device = static_cast<T>(work.device_flops) / static_cast<T>(dev.flops);
        ut.t_server = static_cast<T>(work.edge_flops) / (ut.lambda * static_cast<T>(srv.unit_flops));
        if (ev.active[i]) {
            ut.up_bits = intermediate_bits(sc.profile, splits[i]);
            ut.down_bits = sc.profile.result_bits;
            if (!(ev.up.rate[i] > T(0)) || !(ev.down.rate[i] > T(0))) {
                ut.infeasible = true;
                ev.infeasible = true;
                continue;
            }
            ut.t_up = static_cast<T>(ut.up_bits) / ev.up.rate[i];
            ut.t_down = static_cast<T>(ut.down_bits) / ev.down.rate[i];
        }
        ut.t_total = ut.t_device + ut.t_server + ut.t_up + ut.t_down;
        ut.e_device = device_compute_energy<T>(dev, static_cast<T>(work.device_flops));
        ut.e_server = server_compute_energy<T>(srv, ut.lambda, static_cast<T>(work.edge_flops));
        ut.e_up = static_cast<T>(a.p[i]) * ut.t_up;
        ut.e_down = static_cast<T>(a.P[i]) * ut.t_down;
        ut.e_total = ut.e_device + ut.e_up + ut.e_down + ut.e_server;
        ut.indicator = soft_indicator<T>(ut.t_total, sc.qoe[i]);
        ut.dct_soft = (ut.t_total - static_cast<T>(sc.qoe[i].q)) * ut.indicator;
        ut.dct_hard = dct(static_cast<double>(ut.t_total), sc.qoe[i]);
        T qoe_term;
        if (mode == QoeMode::soft) {
            qoe_term = ut.dct_soft + static_cast<T>(sc.z_scale) * ut.indicator;
        } else {
            const bool late = static_cast<double>(ut.t_total) > sc.qoe[i].q;
            qoe_term = static_cast<T>(ut.dct_hard) + static_cast<T>(sc.z_scale) * (late ? T(1) : T(0));
        }
        ut.utility = static_cast<T>(w.w_t) * ut.t_total + static_cast<T>(w.w_r) * (ut.e_total + ut.lambda) +
                     static_cast<T>(w.w_q) * qoe_term;
        ev.gamma += ut.utility;
    }
    if (ev.infeasible) ev.gamma = std::numeric_limits<T>::infinity();
    return ev;
}

}  // namespace detail

struct UtilityValue {
    double gamma = 0.0;
    std::vector<double> per_user;
    std::vector<CostBreakdown> breakdowns;
    bool feasible = true;
};

/// Gamma only, evaluated in precision T. Infeasible allocations (a
/// transmitting user with zero rate) give +inf. No feasibility check on the
/// allocation itself; callers on hot paths keep it feasible.
template <std::floating_point T = double>
T gamma_value(const Scenario& sc, const SplitVector& splits, const RelaxedAllocation& a,
              QoeMode mode = QoeMode::soft) {
    return detail::evaluate<T>(sc, splits, a, mode).gamma;
}

inline UtilityValue utility(const Scenario& sc, const SplitVector& splits, const RelaxedAllocation& a,
                            QoeMode mode = QoeMode::soft) {
    if (!is_feasible(sc, a)) throw ValidationError("utility: allocation violates simplex or box constraints");
    for (auto k : splits) require_split_point(sc.profile, k);
    const auto ev = detail::evaluate<double>(sc, splits, a, mode);
    UtilityValue out;
    out.feasible = !ev.infeasible;
    out.gamma = ev.gamma;
    for (const auto& ut : ev.users) {
        CostBreakdown b;
        b.t_device = ut.t_device;
        b.t_server = ut.t_server;
        b.t_up = ut.t_up;
        b.t_down = ut.t_down;
        b.t_total = ut.t_total;
        b.e_device = ut.e_device;
        b.e_up = ut.e_up;
        b.e_down = ut.e_down;
        b.e_server = ut.e_server;
        b.e_total = ut.e_total;
        b.dct = ut.dct_hard;
        b.dct_soft = ut.dct_soft;
        b.soft_indicator = ut.indicator;
        b.resource_penalty = ut.lambda;
        b.infeasible = ut.infeasible;
        out.breakdowns.push_back(b);
        out.per_user.push_back(ut.infeasible ? std::numeric_limits<double>::infinity() : ut.utility);
    }
    return out;
}

namespace detail {

// Back-propagates dGamma/d(rate_i) = rho_i through one link into the shares
// and powers of every user, including the interference cross terms.
inline void backprop_link(Link l, const Scenario& sc, const LinkLoad& load, const LinkState<double>& st,
                          std::span<const double> rho, std::span<double> g_beta, std::span<double> g_power) {
    const auto& ch = sc.channel;
    const std::size_t u = sc.users(), mc = sc.subchannels();
    const double b = sc.topology.subchannel_bandwidth(l);
    for (std::size_t i = 0; i < u; ++i) {
        if (!load.active[i] || rho[i] == 0.0) continue;
        for (std::size_t m = 0; m < mc; ++m) {
            const double y = st.sinr[i * mc + m];
            const double d = st.denom[i * mc + m];
            g_beta[i * mc + m] += rho[i] * b * std::log2(1.0 + y);
            const double kappa = rho[i] * load.share(i, m, mc) * b / ((1.0 + y) * std::numbers::ln2);
            if (kappa == 0.0) continue;
            g_power[i] += kappa * ch.own_gain(l, i, m) / d;
            const double f = -kappa * y / d;
            for (std::size_t v = 0; v < u; ++v) {
                if (!load.active[v]) continue;
                const double c = interference_gain(l, ch, i, v, m);
                if (c == 0.0) continue;
                g_beta[v * mc + m] += f * load.power[v] * c;
                g_power[v] += f * load.share(v, m, mc) * c;
            }
        }
    }
}

}  // namespace detail

/// Analytic dGamma over (beta_up, beta_down, p, P, r) for the soft objective.
inline AllocationGradient gradient(const Scenario& sc, const SplitVector& splits, const RelaxedAllocation& a) {
    const auto ev = detail::evaluate<double>(sc, splits, a, QoeMode::soft);
    if (ev.infeasible) throw ValidationError("gradient: allocation has a zero-rate transmitting user");
    const std::size_t u = sc.users();
    AllocationGradient g(u, sc.subchannels());
    std::vector<double> rho_up(u, 0.0), rho_down(u, 0.0);
    const auto& srv = sc.server;
    for (std::size_t i = 0; i < u; ++i) {
        const auto& ut = ev.users[i];
        const auto& w = sc.weights[i];
        const auto& q = sc.qoe[i];
        // dU_i / dT_i
        const double r_prime = soft_indicator_derivative(ut.t_total, q);
        const double alpha =
            w.w_t + w.w_q * (ut.indicator + (ut.t_total - q.q) * r_prime + sc.z_scale * r_prime);
        if (ev.active[i]) {
            const double up_rate = ev.up.rate[i], down_rate = ev.down.rate[i];
            rho_up[i] = -(alpha + w.w_r * a.p[i]) * ut.up_bits / (up_rate * up_rate);
            rho_down[i] = -(alpha + w.w_r * a.P[i]) * ut.down_bits / (down_rate * down_rate);
            g.p[i] += w.w_r * ut.t_up;
            g.P[i] += w.w_r * ut.t_down;
        }
        const double lam = ut.lambda, lam_p = ut.lambda_prime;
        const double dt_dr = -ut.edge_flops * lam_p / (lam * lam * srv.unit_flops);
        const double de_dr =
            2.0 * srv.kappa * lam * lam_p * srv.unit_flops * srv.unit_flops * srv.cycles_per_bit * ut.edge_flops;
        g.r[i] = alpha * dt_dr + w.w_r * (de_dr + lam_p);
    }
    const LinkLoad up{a.beta_up, a.p, ev.active};
    const LinkLoad down{a.beta_down, a.P, ev.active};
    detail::backprop_link(Link::up, sc, up, ev.up, rho_up, g.beta_up, g.p);
    detail::backprop_link(Link::down, sc, down, ev.down, rho_down, g.beta_down, g.P);
    return g;
}

// ---------------------------------------------------------------------------
// Projection

/// Euclidean projection onto the probability simplex (sort-based).
inline void project_simplex(std::span<double> v) {
    if (v.empty()) return;
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    for (auto& x : v) x = std::max(x - theta, 0.0);
}

/// Shares onto the simplex per user and link, powers and compute units
/// clamped to their boxes. Idempotent up to rounding.
inline RelaxedAllocation project(const Scenario& sc, RelaxedAllocation a) {
    const std::size_t mc = a.n_sub;
    for (std::size_t i = 0; i < a.n_users; ++i) {
        project_simplex(std::span<double>(a.beta_up).subspan(i * mc, mc));
        project_simplex(std::span<double>(a.beta_down).subspan(i * mc, mc));
        a.p[i] = std::clamp(a.p[i], sc.devices[i].p_min, sc.devices[i].p_max);
        a.P[i] = std::clamp(a.P[i], sc.server.P_min, sc.server.P_max);
        a.r[i] = std::clamp(a.r[i], sc.server.r_min, sc.server.r_max);
    }
    return a;
}

}  // namespace qsplit
