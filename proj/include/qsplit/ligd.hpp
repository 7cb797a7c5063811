#pragma once

// Per-split projected gradient descent with loop-iteration warm starts,
// rounding to one subchannel per user, and split selection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/scenario.hpp"
#include "qsplit/utility.hpp"

namespace qsplit {

enum class StepMode { fixed_step, backtracking };

enum class Termination {
    grad_norm,     // projected gradient below eps
    rel_change,    // |dGamma / Gamma| below eps
    param_change,  // max normalized parameter move below eps
    max_iter,
    no_descent     // no step along -g decreased Gamma
};

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::grad_norm: return "grad_norm";
        case Termination::rel_change: return "rel_change";
        case Termination::param_change: return "param_change";
        case Termination::max_iter: return "max_iter";
        case Termination::no_descent: return "no_descent";
    }
    return "?";
}

struct GdParams {
    double eta = 1e-2;
    double eps = 1e-4;
    std::size_t max_iter = 5000;
    StepMode mode = StepMode::backtracking;
    std::size_t max_backtracks = 50;
    bool refine_splits = false;
};

inline void validate(const GdParams& p) {
    if (!(p.eta > 0.0)) throw ValidationError("gd.eta: must be positive");
    if (!(p.eps > 0.0)) throw ValidationError("gd.eps: must be positive");
    if (p.max_iter < 1) throw ValidationError("gd.max_iter: must be >= 1");
}

struct LayerSolve {
    std::size_t split = 0;
    RelaxedAllocation alloc_star;
    double gamma_star = 0.0;
    std::size_t iters = 0;
    std::vector<double> trace;       // Gamma at every accepted iterate, starting with init
    std::vector<double> grad_norms;  // projected-gradient norm at the same iterates
    Termination termination = Termination::max_iter;
    std::optional<std::size_t> warm_from;  // index of the layer used as start, if any
};

struct OptimizationResult {
    std::vector<LayerSolve> per_layer;
    std::size_t chosen_split = 0;
    std::size_t chosen_layer = 0;
    SplitVector splits;  // per user, after SIC pinning and optional refinement
    RoundedAllocation rounded;
    std::size_t total_iters = 0;
    double gamma_relaxed = 0.0;  // soft objective of the chosen layer
    double gamma_rounded = 0.0;  // hard objective after rounding
    std::vector<CostBreakdown> hard_metrics;
};

namespace detail {

/// Box width of every flat coordinate; the GD preconditioner is width^2 so
/// that steps are taken in box-normalized units.
inline std::vector<double> coordinate_widths(const Scenario& sc) {
    const std::size_t u = sc.users(), um = u * sc.subchannels();
    std::vector<double> w(2 * um + 3 * u, 1.0);
    for (std::size_t i = 0; i < u; ++i) {
        w[2 * um + i] = sc.devices[i].p_max - sc.devices[i].p_min;
        w[2 * um + u + i] = sc.server.P_max - sc.server.P_min;
        w[2 * um + 2 * u + i] = sc.server.r_max - sc.server.r_min;
    }
    return w;
}

inline RelaxedAllocation descend(const Scenario& sc, const RelaxedAllocation& x, const AllocationGradient& g,
                                 std::span<const double> width, double step) {
    RelaxedAllocation y = x;
    for (std::size_t j = 0; j < y.size(); ++j) y[j] -= step * width[j] * width[j] * g[j];
    return project(sc, std::move(y));
}

/// Norm of the projected-gradient mapping (x - y) / step in normalized units.
inline double mapping_norm(const RelaxedAllocation& x, const RelaxedAllocation& y, std::span<const double> width,
                           double step) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (width[j] <= 0.0) continue;
        const double d = (x[j] - y[j]) / (step * width[j]);
        s += d * d;
    }
    return std::sqrt(s);
}

inline double max_normalized_move(const RelaxedAllocation& x, const RelaxedAllocation& y,
                                  std::span<const double> width) {
    double m = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
        if (width[j] > 0.0) m = std::max(m, std::abs(x[j] - y[j]) / width[j]);
    return m;
}

}  // namespace detail

/// Projected GD on one split vector. Only steps that do not increase Gamma
/// are accepted, so the trace is monotone.
inline LayerSolve gd_solve(const Scenario& sc, const SplitVector& splits, const RelaxedAllocation& init,
                           const GdParams& params) {
    validate(params);
    if (!is_feasible(sc, init)) throw ValidationError("gd_solve: initial allocation is infeasible");
    LayerSolve out;
    out.split = splits.empty() ? 0 : splits.front();
    RelaxedAllocation x = init;
    double f = gamma_value(sc, splits, x);
    if (!std::isfinite(f)) throw ValidationError("gd_solve: utility at the initial point is not finite");
    const auto width = detail::coordinate_widths(sc);
    out.trace.push_back(f);

    bool need_final_norm = false;
    out.termination = Termination::max_iter;
    while (true) {
        const auto g = gradient(sc, splits, x);
        RelaxedAllocation y = detail::descend(sc, x, g, width, params.eta);
        const double gnorm = detail::mapping_norm(x, y, width, params.eta);
        out.grad_norms.push_back(gnorm);
        need_final_norm = false;
        if (gnorm < params.eps) {
            out.termination = Termination::grad_norm;
            break;
        }
        if (out.iters >= params.max_iter) break;

        double step = params.eta;
        double fy = gamma_value(sc, splits, y);
        std::size_t halvings = 0;
        while (!(fy <= f)) {
            if (params.mode == StepMode::fixed_step || halvings == params.max_backtracks) break;
            step *= 0.5;
            ++halvings;
            y = detail::descend(sc, x, g, width, step);
            fy = gamma_value(sc, splits, y);
        }
        if (!(fy <= f)) {
            out.termination = Termination::no_descent;
            break;
        }
        const double move = detail::max_normalized_move(x, y, width);
        const double rel = std::abs(f - fy) / std::max(std::abs(f), std::numeric_limits<double>::min());
        x = std::move(y);
        f = fy;
        out.trace.push_back(f);
        ++out.iters;
        need_final_norm = true;
        if (rel < params.eps) {
            out.termination = Termination::rel_change;
            break;
        }
        if (move < params.eps) {
            out.termination = Termination::param_change;
            break;
        }
    }
    if (need_final_norm) {
        const auto g = gradient(sc, splits, x);
        out.grad_norms.push_back(
            detail::mapping_norm(x, detail::descend(sc, x, g, width, params.eta), width, params.eta));
    }
    out.alloc_star = std::move(x);
    out.gamma_star = f;
    return out;
}

/// Index into `solved_bits` of the prior layer whose intermediate data size
/// is closest to `target_bits`; ties go to the most recent.
inline std::size_t warm_start_index(double target_bits, std::span<const double> solved_bits) {
    if (solved_bits.empty()) throw ValidationError("warm_start_select: no solved layer to start from");
    std::size_t best = 0;
    double best_d = std::abs(solved_bits[0] - target_bits);
    for (std::size_t j = 1; j < solved_bits.size(); ++j) {
        const double d = std::abs(solved_bits[j] - target_bits);
        if (d <= best_d) {
            best = j;
            best_d = d;
        }
    }
    return best;
}

/// Start point for split point `alpha` (index into profile.split_points)
/// from the layers solved so far.
inline const RelaxedAllocation& warm_start_select(std::size_t alpha, std::span<const LayerSolve> solved,
                                                  const ModelProfile& profile) {
    if (alpha >= profile.split_points.size()) throw ValidationError("warm_start_select: layer index out of range");
    std::vector<double> bits;
    for (const auto& s : solved) bits.push_back(intermediate_bits(profile, s.split));
    const double target = intermediate_bits(profile, profile.split_points[alpha]);
    return solved[warm_start_index(target, bits)].alloc_star;
}

// ---------------------------------------------------------------------------
// Rounding

namespace detail {

inline std::size_t argmax_share(const RelaxedAllocation& a, Link l, std::size_t i) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < a.n_sub; ++m) {
        const double v = l == Link::up ? a.up(i, m) : a.down(i, m);
        const double b = l == Link::up ? a.up(i, best) : a.down(i, best);
        if (v > b) best = m;
    }
    return best;
}

inline std::vector<std::size_t>& assignment(RoundedAllocation& r, Link l) { return l == Link::up ? r.up : r.down; }

struct Overload {
    Link link;
    std::size_t ap, sub;
};

inline std::optional<Overload> find_overload(const Scenario& sc, const SplitVector& splits,
                                             const RoundedAllocation& r) {
    const std::size_t mc = sc.subchannels();
    for (Link l : {Link::up, Link::down}) {
        std::vector<std::size_t> count(sc.topology.n_aps * mc, 0);
        const auto& as = l == Link::up ? r.up : r.down;
        for (std::size_t i = 0; i < sc.users(); ++i)
            if (splits[i] < sc.full_device()) ++count[sc.channel.assoc[i] * mc + as[i]];
        for (std::size_t n = 0; n < sc.topology.n_aps; ++n)
            for (std::size_t m = 0; m < mc; ++m)
                if (count[n * mc + m] > sc.topology.cluster_cap) return Overload{l, n, m};
    }
    return std::nullopt;
}

inline std::size_t cluster_size(const Scenario& sc, const SplitVector& splits, const RoundedAllocation& r, Link l,
                                std::size_t ap, std::size_t m) {
    const auto& as = l == Link::up ? r.up : r.down;
    std::size_t c = 0;
    for (std::size_t i = 0; i < sc.users(); ++i)
        if (splits[i] < sc.full_device() && sc.channel.assoc[i] == ap && as[i] == m) ++c;
    return c;
}

}  // namespace detail

inline double hard_gamma(const Scenario& sc, const SplitVector& splits, const RoundedAllocation& r) {
    return gamma_value(sc, splits, r.relaxed(sc.subchannels()), QoeMode::hard);
}

/// Argmax rounding of the shares, then greedy repair of clusters above the
/// cap: among all single moves of a user out of an overloaded cluster into a
/// subchannel with room, take the one with the smallest hard Gamma. Only
/// transmitting users occupy clusters.
inline RoundedAllocation round_allocation(const Scenario& sc, const SplitVector& splits, const RelaxedAllocation& a) {
    const std::size_t u = sc.users(), mc = sc.subchannels();
    for (std::size_t n = 0; n < sc.topology.n_aps; ++n) {
        std::size_t active = 0;
        for (std::size_t i = 0; i < u; ++i)
            if (sc.channel.assoc[i] == n && splits[i] < sc.full_device()) ++active;
        if (active > sc.topology.cluster_cap * mc)
            throw ValidationError("topology.cluster_cap: " + std::to_string(active) + " transmitting users at AP " +
                                  std::to_string(n) + " exceed cap x subchannels");
    }
    RoundedAllocation r;
    r.up.resize(u);
    r.down.resize(u);
    for (std::size_t i = 0; i < u; ++i) {
        r.up[i] = detail::argmax_share(a, Link::up, i);
        r.down[i] = detail::argmax_share(a, Link::down, i);
    }
    r.p = a.p;
    r.P = a.P;
    r.r = a.r;

    while (auto over = detail::find_overload(sc, splits, r)) {
        double best = std::numeric_limits<double>::infinity();
        std::optional<std::pair<std::size_t, std::size_t>> move;  // (user, target subchannel)
        for (std::size_t i = 0; i < u; ++i) {
            auto& as = detail::assignment(r, over->link);
            if (splits[i] >= sc.full_device() || sc.channel.assoc[i] != over->ap || as[i] != over->sub) continue;
            for (std::size_t m = 0; m < mc; ++m) {
                if (m == over->sub ||
                    detail::cluster_size(sc, splits, r, over->link, over->ap, m) >= sc.topology.cluster_cap)
                    continue;
                as[i] = m;
                const double g = hard_gamma(sc, splits, r);
                as[i] = over->sub;
                if (g < best || !move) {
                    best = g;
                    move = {i, m};
                }
            }
        }
        detail::assignment(r, over->link)[move->first] = move->second;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Full pipeline

namespace detail {

/// Greedy per-user split refinement on the rounded allocation, holding the
/// other users fixed. Accepts only strict hard-Gamma improvements that keep
/// the cluster cap.
inline void refine_splits(const Scenario& sc, SplitVector& splits, RoundedAllocation& r) {
    const auto pinned = sic_pinned(sc);
    double current = hard_gamma(sc, splits, r);
    for (int pass = 0; pass < 3; ++pass) {
        bool improved = false;
        for (std::size_t i = 0; i < sc.users(); ++i) {
            if (pinned[i]) continue;
            for (auto k : sc.profile.split_points) {
                if (k == splits[i]) continue;
                const auto old = splits[i];
                splits[i] = k;
                if (!find_overload(sc, splits, r)) {
                    const double g = hard_gamma(sc, splits, r);
                    if (g < current) {
                        current = g;
                        improved = true;
                        continue;
                    }
                }
                splits[i] = old;
            }
        }
        if (!improved) break;
    }
}

inline OptimizationResult solve_layers(const Scenario& sc, const GdParams& params, bool warm) {
    validate(params);
    const auto& pts = sc.profile.split_points;
    if (pts.empty()) throw ValidationError("split_points: no admissible split");
    OptimizationResult out;
    const auto cold = cold_init(sc);
    for (std::size_t idx = 0; idx < pts.size(); ++idx) {
        const auto splits = shared_splits(sc, pts[idx]);
        std::optional<std::size_t> from;
        if (warm && idx > 0) {
            std::vector<double> bits;
            for (const auto& s : out.per_layer) bits.push_back(intermediate_bits(sc.profile, s.split));
            from = warm_start_index(intermediate_bits(sc.profile, pts[idx]), bits);
        }
        LayerSolve ls = gd_solve(sc, splits, from ? out.per_layer[*from].alloc_star : cold, params);
        ls.split = pts[idx];
        ls.warm_from = from;
        out.total_iters += ls.iters;
        out.per_layer.push_back(std::move(ls));
    }
    for (std::size_t j = 1; j < out.per_layer.size(); ++j)
        if (out.per_layer[j].gamma_star < out.per_layer[out.chosen_layer].gamma_star) out.chosen_layer = j;
    const auto& best = out.per_layer[out.chosen_layer];
    out.chosen_split = best.split;
    out.gamma_relaxed = best.gamma_star;
    out.splits = shared_splits(sc, best.split);
    out.rounded = round_allocation(sc, out.splits, best.alloc_star);
    if (params.refine_splits) refine_splits(sc, out.splits, out.rounded);
    const auto hard = utility(sc, out.splits, out.rounded.relaxed(sc.subchannels()), QoeMode::hard);
    out.gamma_rounded = hard.gamma;
    out.hard_metrics = hard.breakdowns;
    return out;
}

}  // namespace detail

/// First admissible split from the cold start, every later split from the
/// closest solved layer by intermediate data size.
inline OptimizationResult li_gd(const Scenario& sc, const GdParams& params = {}) {
    return detail::solve_layers(sc, params, true);
}

/// Same pipeline with every layer started cold.
inline OptimizationResult cold_gd(const Scenario& sc, const GdParams& params = {}) {
    return detail::solve_layers(sc, params, false);
}

}  // namespace qsplit
