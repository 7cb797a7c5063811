#pragma once

// Fixed-policy comparison strategies and the exhaustive grid oracle.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/ligd.hpp"
#include "qsplit/scenario.hpp"
#include "qsplit/utility.hpp"

namespace qsplit {

struct Totals {
    double sum_t = 0.0;
    double sum_e = 0.0;
    double hard_c = 0.0;
    double hard_z = 0.0;
};

inline Totals totals_of(const std::vector<CostBreakdown>& b, const std::vector<QoESpec>& qoe) {
    Totals t;
    for (std::size_t i = 0; i < b.size(); ++i) {
        t.sum_t += b[i].t_total;
        t.sum_e += b[i].e_total;
        t.hard_c += b[i].dct;
        t.hard_z += b[i].t_total > qoe[i].q ? 1.0 : 0.0;
    }
    return t;
}

struct BaselineResult {
    std::string name;
    std::string rule;  // resource policy, echoed in output metadata
    SplitVector splits;
    RoundedAllocation alloc;
    std::vector<CostBreakdown> breakdowns;
    Totals totals;
    double gamma = 0.0;  // hard objective under the scenario weights
};

inline constexpr const char* fixed_resource_rule =
    "r = clamp(units_per_ap / users_at_ap, r_min, r_max); subchannel = gain rank mod M per AP; p = p_max; P = P_max";

/// Equal compute shares per AP, subchannels dealt round-robin in
/// descending average-gain order, maximum powers.
inline RoundedAllocation fixed_resource_allocation(const Scenario& sc) {
    const std::size_t u = sc.users(), mc = sc.subchannels();
    RoundedAllocation r;
    r.up.assign(u, 0);
    r.down.assign(u, 0);
    r.p.resize(u);
    r.P.assign(u, sc.server.P_max);
    r.r.resize(u);
    for (std::size_t i = 0; i < u; ++i) r.p[i] = sc.devices[i].p_max;
    for (std::size_t n = 0; n < sc.topology.n_aps; ++n) {
        auto users = sc.channel.users_of(n);
        if (users.empty()) continue;
        const double share = std::clamp(sc.server.units_per_ap / static_cast<double>(users.size()), sc.server.r_min,
                                        sc.server.r_max);
        for (auto i : users) r.r[i] = share;
        for (Link l : {Link::up, Link::down}) {
            std::vector<double> mean(u, 0.0);
            for (auto i : users)
                for (std::size_t m = 0; m < mc; ++m) mean[i] += sc.channel.own_gain(l, i, m);
            auto ranked = users;
            std::stable_sort(ranked.begin(), ranked.end(), [&](auto a, auto b) { return mean[a] > mean[b]; });
            auto& as = l == Link::up ? r.up : r.down;
            for (std::size_t j = 0; j < ranked.size(); ++j) as[ranked[j]] = j % mc;
        }
    }
    return r;
}

namespace detail {

inline BaselineResult finish_baseline(const Scenario& sc, std::string name, std::string rule, SplitVector splits,
                                      RoundedAllocation alloc) {
    BaselineResult out;
    out.name = std::move(name);
    out.rule = std::move(rule);
    const auto v = utility(sc, splits, alloc.relaxed(sc.subchannels()), QoeMode::hard);
    out.splits = std::move(splits);
    out.alloc = std::move(alloc);
    out.breakdowns = v.breakdowns;
    out.gamma = v.gamma;
    out.totals = totals_of(out.breakdowns, sc.qoe);
    return out;
}

}  // namespace detail

/// Whole model on every device; r sits at r_min since no edge work exists.
inline BaselineResult device_only(const Scenario& sc) {
    auto alloc = fixed_resource_allocation(sc);
    std::fill(alloc.up.begin(), alloc.up.end(), 0);
    std::fill(alloc.down.begin(), alloc.down.end(), 0);
    std::fill(alloc.r.begin(), alloc.r.end(), sc.server.r_min);
    return detail::finish_baseline(sc, "device_only", "k = F; r = r_min", SplitVector(sc.users(), sc.full_device()),
                                   std::move(alloc));
}

/// Whole model on the edge under the fixed-resource rule. SIC-pinned users
/// stay local.
inline BaselineResult edge_only(const Scenario& sc) {
    return detail::finish_baseline(sc, "edge_only", fixed_resource_rule, shared_splits(sc, 0),
                                   fixed_resource_allocation(sc));
}

/// Per-user best split for delay under the fixed-resource rule, with rates
/// computed as if every user transmits. No joint optimization.
inline BaselineResult exhaustive_split(const Scenario& sc) {
    const auto alloc = fixed_resource_allocation(sc);
    const auto relaxed = alloc.relaxed(sc.subchannels());
    const std::vector<std::uint8_t> all(sc.users(), 1);
    const auto up = detail::evaluate_link<double>(Link::up, sc, LinkLoad{relaxed.beta_up, relaxed.p, all});
    const auto down = detail::evaluate_link<double>(Link::down, sc, LinkLoad{relaxed.beta_down, relaxed.P, all});
    const auto pinned = sic_pinned(sc);
    SplitVector splits(sc.users(), sc.full_device());
    for (std::size_t i = 0; i < sc.users(); ++i) {
        if (pinned[i]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (auto k : sc.profile.split_points) {
            const auto [tu, td] = transmission_delays(sc.profile, k, up.rate[i], down.rate[i]);
            const Delay t = Delay::finite(device_delay(sc.profile, k, sc.devices[i])) +
                            Delay::finite(server_delay(sc.profile, k, alloc.r[i], sc.server)) + tu + td;
            if (t.infeasible) continue;
            if (t.seconds < best) {
                best = t.seconds;
                splits[i] = k;
            }
        }
    }
    return detail::finish_baseline(sc, "exhaustive_split", fixed_resource_rule, std::move(splits), alloc);
}

// ---------------------------------------------------------------------------
// Exhaustive grid oracle

struct OracleGrid {
    std::size_t p_points = 5;
    std::size_t P_points = 5;
    std::size_t r_points = 5;
    double budget = 1e7;  // maximum objective evaluations
};

/// n evenly spaced values over [lo, hi]; a single point is the midpoint.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) throw ValidationError("oracle grid: need at least one point");
    if (n == 1) return {0.5 * (lo + hi)};
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
    return v;
}

struct OracleResult {
    SplitVector splits;
    RoundedAllocation alloc;
    double gamma = std::numeric_limits<double>::infinity();
    double evaluations = 0.0;
};

/// Number of objective evaluations brute_force would perform. Local users
/// contribute no subchannel or power choices.
inline double oracle_size(const Scenario& sc, const OracleGrid& grid) {
    const double s = static_cast<double>(sc.profile.split_points.size());
    const double m = static_cast<double>(sc.subchannels());
    const double tx = m * m * static_cast<double>(grid.p_points * grid.P_points);
    // per user: one local split with no radio choices plus the rest with all of them
    const double per_user = (1.0 + (s - 1.0) * tx) * static_cast<double>(grid.r_points);
    double total = 1.0;
    for (std::size_t i = 0; i < sc.users(); ++i) total *= per_user;
    return total;
}

namespace detail {

// Mixed-radix counter; returns false after wrapping past the last value.
inline bool advance(std::vector<std::size_t>& digits, const std::vector<std::size_t>& radix) {
    for (std::size_t j = 0; j < digits.size(); ++j) {
        if (++digits[j] < radix[j]) return true;
        digits[j] = 0;
    }
    return false;
}

}  // namespace detail

/// Exact minimum of the hard objective over split vectors, cap-respecting
/// subchannel assignments and the p/P/r grids. Refuses with the size
/// estimate when it exceeds the budget.
inline OracleResult brute_force(const Scenario& sc, const OracleGrid& grid = {}) {
    const double size = oracle_size(sc, grid);
    if (size > grid.budget) throw BudgetExceeded(size, grid.budget);
    const std::size_t u = sc.users(), mc = sc.subchannels();
    const auto& pts = sc.profile.split_points;
    const auto pinned = sic_pinned(sc);
    std::vector<std::vector<double>> pg(u);
    for (std::size_t i = 0; i < u; ++i) pg[i] = linspace(sc.devices[i].p_min, sc.devices[i].p_max, grid.p_points);
    const auto Pg = linspace(sc.server.P_min, sc.server.P_max, grid.P_points);
    const auto rg = linspace(sc.server.r_min, sc.server.r_max, grid.r_points);

    // Outer product of split choices, enumerated in lexicographic order.
    std::vector<SplitVector> combos;
    {
        std::vector<std::size_t> d(u, 0), radix(u, pts.size());
        for (std::size_t i = 0; i < u; ++i)
            if (pinned[i]) radix[i] = 1;
        do {
            SplitVector s(u);
            for (std::size_t i = 0; i < u; ++i) s[i] = pinned[i] ? sc.full_device() : pts[d[i]];
            combos.push_back(std::move(s));
        } while (detail::advance(d, radix));
    }

    auto search = [&](const SplitVector& splits) {
        OracleResult best;
        best.splits = splits;
        // digits per user: up, down, p, P, r
        std::vector<std::size_t> d(5 * u, 0), radix(5 * u, 1);
        for (std::size_t i = 0; i < u; ++i) {
            const bool tx = splits[i] < sc.full_device();
            radix[5 * i + 0] = tx ? mc : 1;
            radix[5 * i + 1] = tx ? mc : 1;
            radix[5 * i + 2] = tx ? grid.p_points : 1;
            radix[5 * i + 3] = tx ? grid.P_points : 1;
            radix[5 * i + 4] = grid.r_points;
        }
        RoundedAllocation r;
        r.up.assign(u, 0);
        r.down.assign(u, 0);
        r.p.assign(u, 0.0);
        r.P.assign(u, 0.0);
        r.r.assign(u, 0.0);
        do {
            for (std::size_t i = 0; i < u; ++i) {
                const bool tx = splits[i] < sc.full_device();
                r.up[i] = d[5 * i];
                r.down[i] = d[5 * i + 1];
                r.p[i] = tx ? pg[i][d[5 * i + 2]] : sc.devices[i].p_max;
                r.P[i] = tx ? Pg[d[5 * i + 3]] : sc.server.P_max;
                r.r[i] = rg[d[5 * i + 4]];
            }
            if (detail::find_overload(sc, splits, r)) continue;
            const double g = hard_gamma(sc, splits, r);
            best.evaluations += 1.0;
            if (g < best.gamma) {
                best.gamma = g;
                best.alloc = r;
            }
        } while (detail::advance(d, radix));
        return best;
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                                                combos.size()));
    std::vector<std::future<OracleResult>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            OracleResult best;
            for (std::size_t c = w; c < combos.size(); c += workers) {
                auto r = search(combos[c]);
                best.evaluations += r.evaluations;
                if (r.gamma < best.gamma) {
                    const double ev = best.evaluations;
                    best = std::move(r);
                    best.evaluations = ev;
                }
            }
            return best;
        }));
    }
    OracleResult out;
    for (auto& j : jobs) {
        auto r = j.get();
        out.evaluations += r.evaluations;
        if (r.gamma < out.gamma) {
            const double ev = out.evaluations;
            out = std::move(r);
            out.evaluations = ev;
        }
    }
    return out;
}

}  // namespace qsplit
