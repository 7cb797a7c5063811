#pragma once

// Scalar delay, energy and QoE cost models for one user.

#include <cmath>
#include <compare>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>

#include "qsplit/error.hpp"
#include "qsplit/profiles.hpp"

namespace qsplit {

struct DeviceSpec {
    double flops = 1e9;           // c_i, FLOP/s
    double kappa = 1e-31;         // effective switched capacitance
    double cycles_per_bit = 1e4;  // phi_i
    double p_min = 0.01;          // W
    double p_max = 0.316;         // W
};

struct ServerSpec {
    double unit_flops = 5e9;      // c_min, FLOP/s per compute unit
    double kappa = 1e-34;
    double cycles_per_bit = 1e4;
    double r_min = 1.0;
    double r_max = 8.0;
    double theta = 1.1;           // lambda(r) = r^theta
    double P_min = 0.1;           // W
    double P_max = 1.0;           // W
    /// Compute units per AP shared by the fixed-resource baselines.
    double units_per_ap = 16.0;
};

struct QoESpec {
    double q = 0.1;     // deadline, s
    double a = 2000.0;  // sigmoid steepness
};

inline void validate(const DeviceSpec& d) {
    if (!(d.flops > 0.0)) throw ValidationError("device.flops: must be positive");
    if (!(d.cycles_per_bit > 0.0)) throw ValidationError("device.cycles_per_bit: must be positive");
    if (d.kappa < 0.0) throw ValidationError("device.kappa: must be nonnegative");
    if (!(d.p_min > 0.0) || d.p_min > d.p_max) throw ValidationError("device.power: need 0 < p_min <= p_max");
}

inline void validate(const ServerSpec& s) {
    if (!(s.unit_flops > 0.0)) throw ValidationError("server.unit_flops: must be positive");
    if (!(s.cycles_per_bit > 0.0)) throw ValidationError("server.cycles_per_bit: must be positive");
    if (s.kappa < 0.0) throw ValidationError("server.kappa: must be nonnegative");
    if (!(s.r_min >= 1.0) || s.r_min > s.r_max) throw ValidationError("server.r: need 1 <= r_min <= r_max");
    if (!(s.theta >= 1.0)) throw ValidationError("server.theta: must be >= 1");
    if (!(s.P_min > 0.0) || s.P_min > s.P_max) throw ValidationError("server.power: need 0 < P_min <= P_max");
}

inline void validate(const QoESpec& q) {
    if (!(q.q > 0.0)) throw ValidationError("qoe.deadline: must be positive");
    if (!(q.a > 0.0)) throw ValidationError("qoe.steepness: must be positive");
}

// ---------------------------------------------------------------------------

/// A delay that may be unbounded (positive payload over a zero-rate link).
/// Infeasible values order above every finite delay.
struct Delay {
    double seconds = 0.0;
    bool infeasible = false;

    static Delay finite(double s) { return {s, false}; }
    static Delay unbounded() { return {0.0, true}; }

    friend bool operator==(const Delay& a, const Delay& b) {
        return a.infeasible == b.infeasible && (a.infeasible || a.seconds == b.seconds);
    }
    friend std::partial_ordering operator<=>(const Delay& a, const Delay& b) {
        if (a.infeasible || b.infeasible) return a.infeasible <=> b.infeasible;
        return a.seconds <=> b.seconds;
    }
    friend Delay operator+(const Delay& a, const Delay& b) {
        if (a.infeasible || b.infeasible) return unbounded();
        return finite(a.seconds + b.seconds);
    }
};

/// lambda(r) = r^theta
template <std::floating_point T = double>
T compensation(T r, double theta) {
    if (!(r >= T(1))) throw ValidationError("compensation: r must be >= 1");
    return std::pow(r, static_cast<T>(theta));
}

template <std::floating_point T = double>
T compensation_derivative(T r, double theta) {
    return static_cast<T>(theta) * std::pow(r, static_cast<T>(theta) - T(1));
}

inline double device_delay(const ModelProfile& p, std::size_t k, const DeviceSpec& d) {
    return cumulative_workload(p, k).device_flops / d.flops;
}

inline double server_delay(const ModelProfile& p, std::size_t k, double r, const ServerSpec& s) {
    return cumulative_workload(p, k).edge_flops / (compensation(r, s.theta) * s.unit_flops);
}

/// payload / rate, with a zero-payload link costing nothing.
inline Delay transfer_delay(double bits, double rate_bps) {
    if (bits <= 0.0) return Delay::finite(0.0);
    if (!(rate_bps > 0.0)) return Delay::unbounded();
    return Delay::finite(bits / rate_bps);
}

/// (uplink intermediate-data delay, downlink result delay). The full-device
/// split sends nothing either way.
inline std::pair<Delay, Delay> transmission_delays(const ModelProfile& p, std::size_t k, double rate_up,
                                                   double rate_down) {
    if (k == p.depth()) return {Delay::finite(0.0), Delay::finite(0.0)};
    return {transfer_delay(intermediate_bits(p, k), rate_up), transfer_delay(p.result_bits, rate_down)};
}

inline Delay total_delay(Delay device, Delay server, Delay up, Delay down) { return device + server + up + down; }

// ---------------------------------------------------------------------------
// Energy (formula units, treated as J)

template <std::floating_point T = double>
T device_compute_energy(const DeviceSpec& d, T device_flops) {
    return static_cast<T>(d.kappa) * static_cast<T>(d.flops) * static_cast<T>(d.flops) *
           static_cast<T>(d.cycles_per_bit) * device_flops;
}

template <std::floating_point T = double>
T server_compute_energy(const ServerSpec& s, T lambda, T edge_flops) {
    const T speed = lambda * static_cast<T>(s.unit_flops);
    return static_cast<T>(s.kappa) * speed * speed * static_cast<T>(s.cycles_per_bit) * edge_flops;
}

// ---------------------------------------------------------------------------
// QoE

/// R(x) = 1 / (1 + e^{-a (x - 1)}), x = t / q. Saturates to exactly 0 or 1
/// instead of overflowing.
template <std::floating_point T = double>
T soft_indicator(T t, const QoESpec& qoe) {
    const T z = static_cast<T>(qoe.a) * (t / static_cast<T>(qoe.q) - T(1));
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

/// dR/dt
template <std::floating_point T = double>
T soft_indicator_derivative(T t, const QoESpec& qoe) {
    const T r = soft_indicator(t, qoe);
    return static_cast<T>(qoe.a) * r * (T(1) - r) / static_cast<T>(qoe.q);
}

/// Hard delayed completion time max(0, t - q).
inline double dct(double t, const QoESpec& qoe) { return t > qoe.q ? t - qoe.q : 0.0; }

/// Relaxed DCT (t - q) * R(t). Slightly negative below the deadline.
template <std::floating_point T = double>
T dct_soft(T t, const QoESpec& qoe) {
    return (t - static_cast<T>(qoe.q)) * soft_indicator(t, qoe);
}

struct QoeAggregate {
    double dct_sum = 0.0;  // C
    double count = 0.0;    // z
};

/// Relaxed totals: C = sum of dct_soft, z = sum of R.
inline QoeAggregate aggregate_qoe(std::span<const double> t, std::span<const QoESpec> qoe) {
    if (t.size() != qoe.size()) throw ValidationError("aggregate_qoe: size mismatch");
    QoeAggregate out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        out.dct_sum += dct_soft(t[i], qoe[i]);
        out.count += soft_indicator(t[i], qoe[i]);
    }
    return out;
}

/// Reporting totals: C = sum of max(0, t - q), z = #{t > q}.
inline QoeAggregate aggregate_qoe_hard(std::span<const double> t, std::span<const QoESpec> qoe) {
    if (t.size() != qoe.size()) throw ValidationError("aggregate_qoe_hard: size mismatch");
    QoeAggregate out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        out.dct_sum += dct(t[i], qoe[i]);
        out.count += t[i] > qoe[i].q ? 1.0 : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------

struct CostBreakdown {
    double t_device = 0.0, t_server = 0.0, t_up = 0.0, t_down = 0.0, t_total = 0.0;
    double e_device = 0.0, e_up = 0.0, e_down = 0.0, e_server = 0.0, e_total = 0.0;
    double dct = 0.0;             // hard form
    double dct_soft = 0.0;
    double soft_indicator = 0.0;
    double resource_penalty = 0.0;  // lambda(r)
    bool infeasible = false;
};

}  // namespace qsplit
