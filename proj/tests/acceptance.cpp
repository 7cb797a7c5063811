// Acceptance run: one PASS/FAIL line per criterion. `--only N` runs a
// single criterion; the exit code is nonzero when any selected one fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support.hpp"

using namespace qsplit;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ScenarioConfig config(const char* name) { return load_config(test::config_path(name)); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

/// Pearson correlation of average ranks; 0 when either side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

std::string join(const std::vector<double>& v, const char* f = "%.4g") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(f, v[i]);
    return s;
}

/// Mean of one li_gd column per sweep value, averaged over seeds.
std::vector<double> sweep_means(const std::vector<MetricsRow>& rows, std::size_t n_values,
                                double MetricsRow::*field) {
    std::vector<double> sum(n_values, 0.0), cnt(n_values, 0.0);
    std::map<std::string, std::size_t> slot;
    for (const auto& r : rows) {
        if (r.strategy != "li_gd") continue;
        const auto it = slot.emplace(r.scenario_id, slot.size()).first;
        sum[it->second] += r.*field;
        cnt[it->second] += 1.0;
    }
    for (std::size_t j = 0; j < n_values; ++j) sum[j] /= cnt[j];
    return sum;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    const double tol = 1e-5, floor = 1e-8;
    std::size_t points = 0, coords = 0, failures = 0;
    double worst = 0.0;
    std::string first_failure;
    std::mt19937_64 rng(2024);
    struct Source {
        const char* config;
        std::size_t points;
    };
    std::set<std::pair<std::string, std::uint64_t>> scenarios;
    for (const Source& src : {Source{"gradcheck.json", 100}, Source{"tiny_oracle.json", 30}, Source{"desk.json", 30}}) {
        const auto cfg = config(src.config);
        const auto& pts = cfg.profile.split_points;
        for (std::size_t n = 0; n < src.points; ++n) {
            const auto seed = cfg.seeds[n % cfg.seeds.size()];
            scenarios.emplace(src.config, seed);
            const auto sc = build_scenario(cfg, seed);
            SplitVector splits(sc.users());
            for (auto& k : splits) k = pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)];
            const auto x = random_interior(sc, rng);
            if (!is_interior(sc, x)) continue;
            const auto g = gradient(sc, splits, x);
            RelaxedAllocation y = x;
            for (std::size_t j = 0; j < x.size(); ++j) {
                // central difference evaluated in extended precision
                const long double h = 1e-7L * std::max(std::abs(x[j]), 1e-3);
                y[j] = x[j] + static_cast<double>(h);
                const long double hp = static_cast<long double>(y[j]) - x[j];
                const long double fp = gamma_value<long double>(sc, splits, y);
                y[j] = x[j] - static_cast<double>(h);
                const long double hm = x[j] - static_cast<long double>(y[j]);
                const long double fm = gamma_value<long double>(sc, splits, y);
                y[j] = x[j];
                const double fd = static_cast<double>((fp - fm) / (hp + hm));
                const double err = std::abs(g[j] - fd), scale = std::max(std::abs(g[j]), std::abs(fd));
                ++coords;
                if (tol * scale > floor) worst = std::max(worst, err / scale);
                if (err > std::max(tol * scale, floor)) {
                    if (failures++ == 0)
                        first_failure = fmt("; first failure %s seed %llu coord %zu: %.6g vs %.6g", src.config,
                                            static_cast<unsigned long long>(seed), j, g[j], fd);
                }
            }
            ++points;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {failures == 0 && points >= 100 && scenarios.size() >= 3 && secs < 60.0,
            fmt("%zu points over %zu scenarios, %zu coordinates, %zu failures, worst relative error %.2e "
                "(tol %.0e, floor %.0e), %.1f s",
                points, scenarios.size(), coords, failures, worst, tol, floor, secs) +
                first_failure};
}

Outcome sigmoid_fixture() {
    const QoESpec q{0.010, 2000.0};
    const double r = soft_indicator(0.01002, q);
    const double mid = soft_indicator(0.010, q);
    const bool ok = std::abs(r - 0.9827) <= 5e-4 && mid == 0.5;
    return {ok, fmt("R(10.02 ms) = %.6f, expected 0.9827 +/- 5e-4 (|diff| %.2e); R(Q) = %.17g", r,
                    std::abs(r - 0.9827), mid)};
}

Outcome figure_two() {
    const std::vector<double> blue{9, 18, 4, 15}, red{11, 5, 7, 20};
    const std::vector<QoESpec> q{{9.25, 1}, {19, 1}, {4.25, 1}, {15.5, 1}};
    const double sum_blue = std::accumulate(blue.begin(), blue.end(), 0.0);
    const double sum_red = std::accumulate(red.begin(), red.end(), 0.0);
    const auto hb = aggregate_qoe_hard(blue, q), hr = aggregate_qoe_hard(red, q);
    const double satisfied = 1.0 - hr.count / 4.0;
    const bool ok = sum_blue == 46 && sum_red == 43 && hr.dct_sum == 9 && hr.count == 3 && satisfied == 0.25 &&
                    hb.count == 0 && hb.dct_sum == 0;
    return {ok, fmt("sums %g and %g, red exceed-sum %g, exceed-count %g (%g%% satisfied), blue exceed-count %g",
                    sum_blue, sum_red, hr.dct_sum, hr.count, 100 * satisfied, hb.count)};
}

Outcome oracle_gap() {
    const auto cfg = config("tiny_oracle.json");
    const auto rep = oracle_check(cfg);
    std::vector<double> gaps;
    for (const auto& s : rep.seeds) gaps.push_back(s.gap);
    return {rep.pass(), fmt("%zu seeds, gaps [%s], max %.4f, bound %.2f", rep.seeds.size(), join(gaps).c_str(),
                            rep.max_gap, rep.bound)};
}

Outcome warm_start_savings() {
    const auto cfg = config("desk.json");
    std::vector<double> li, cold;
    double worst_gamma_diff = 0.0;
    for (auto seed : cfg.seeds) {
        const auto sc = build_scenario(cfg, seed);
        const auto a = li_gd(sc, cfg.gd), b = cold_gd(sc, cfg.gd);
        li.push_back(static_cast<double>(a.total_iters));
        cold.push_back(static_cast<double>(b.total_iters));
        worst_gamma_diff = std::max(worst_gamma_diff, (a.gamma_rounded - b.gamma_rounded) / std::abs(b.gamma_rounded));
    }
    const double ml = median(li), mc = median(cold);
    return {ml < mc, fmt("median total iterations li_gd %.1f vs cold %.1f over %zu seeds; li_gd [%s], cold [%s]; "
                         "largest relative Gamma excess of li_gd %.2e",
                         ml, mc, li.size(), join(li, "%.0f").c_str(), join(cold, "%.0f").c_str(), worst_gamma_diff)};
}

Outcome convergence_contract() {
    std::size_t traces = 0, bad_monotone = 0, bad_stop = 0;
    double worst_rise = 0.0;
    std::map<std::string, std::size_t> stops;
    for (const char* name : {"desk.json", "tiny_oracle.json", "gradcheck.json"}) {
        auto cfg = config(name);
        if (std::string(name) == "gradcheck.json") cfg.gd = config("desk.json").gd;
        for (auto seed : cfg.seeds) {
            const auto sc = build_scenario(cfg, seed);
            for (const auto& r : {li_gd(sc, cfg.gd), cold_gd(sc, cfg.gd)}) {
                for (const auto& l : r.per_layer) {
                    ++traces;
                    ++stops[to_string(l.termination)];
                    bool mono = true;
                    for (std::size_t k = 1; k < l.trace.size(); ++k) {
                        const double rise = (l.trace[k] - l.trace[k - 1]) / std::abs(l.trace[k - 1]);
                        worst_rise = std::max(worst_rise, rise);
                        if (rise > 1e-12) mono = false;
                    }
                    bad_monotone += mono ? 0 : 1;
                    const bool eps_stop = l.termination == Termination::grad_norm ||
                                          l.termination == Termination::rel_change ||
                                          l.termination == Termination::param_change;
                    bad_stop += (eps_stop && l.iters <= cfg.gd.max_iter) ? 0 : 1;
                }
            }
        }
    }
    std::string hist;
    for (const auto& [k, v] : stops) hist += (hist.empty() ? "" : ", ") + k + " " + std::to_string(v);
    return {bad_monotone == 0 && bad_stop == 0,
            fmt("%zu traces, %zu non-monotone (largest relative rise %.2e), %zu not stopped by an eps criterion; "
                "stops: %s",
                traces, bad_monotone, worst_rise, bad_stop, hist.c_str())};
}

Outcome rounding_gap_decay() {
    // Soft and hard QoE terms of the rounded li_gd solution, relative to the
    // rounded objective. Evaluating both at the same point isolates the
    // effect of replacing R by the 0/1 indicator.
    auto cfg = config("desk.json");
    const std::vector<double> steep{10.0, 100.0, 2000.0};
    std::size_t failing = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::vector<double> gap, dct_gap;
        for (double a : steep) {
            cfg.steepness = a;
            const auto sc = build_scenario(cfg, seed);
            const auto r = li_gd(sc, cfg.gd);
            const auto v = utility(sc, r.splits, r.rounded.relaxed(sc.subchannels()), QoeMode::hard);
            double soft = 0.0, hard = 0.0, dsoft = 0.0, dhard = 0.0, qsum = 0.0;
            for (std::size_t i = 0; i < sc.users(); ++i) {
                const auto& b = v.breakdowns[i];
                const double wq = sc.weights[i].w_q;
                const double late = b.t_total > sc.qoe[i].q ? 1.0 : 0.0;
                soft += wq * (b.dct_soft + sc.z_scale * b.soft_indicator);
                hard += wq * (b.dct + sc.z_scale * late);
                dsoft += b.dct_soft;
                dhard += b.dct;
                qsum += sc.qoe[i].q;
            }
            gap.push_back(std::abs(soft - hard) / std::abs(v.gamma));
            dct_gap.push_back(std::abs(dsoft - dhard) / qsum);
        }
        const bool mono = gap[1] <= gap[0] && gap[2] <= gap[1];
        failing += mono ? 0 : 1;
        detail += fmt("%sseed %llu [%s]%s (delay term alone [%s])", seed == 1 ? "" : "; ",
                      static_cast<unsigned long long>(seed), join(gap, "%.3e").c_str(), mono ? "" : " INCREASES",
                      join(dct_gap, "%.2e").c_str());
    }
    return {failing == 0, fmt("a = 10, 100, 2000; %zu of 5 seeds non-monotone: ", failing) + detail};
}

Outcome trend_reproduction() {
    auto cfg = config("desk.json");
    cfg.strategies = {"li_gd"};
    std::string detail;

    // (i) deadlines divided by the threshold percent: lower percent = looser
    const std::vector<double> pct{1.0, 0.95, 0.9, 0.85, 0.8};
    const auto rows_i = sweep(cfg, "qoe_threshold", pct);
    const auto z_i = sweep_means(rows_i, pct.size(), &MetricsRow::hard_z);
    const auto e_i = sweep_means(rows_i, pct.size(), &MetricsRow::sum_e);
    std::vector<double> level;
    for (double p : pct) level.push_back(1.0 / p);
    const double rho_z = spearman(level, z_i), rho_e = spearman(level, e_i);
    const bool ok_i = rho_z <= 0.0 && rho_e <= 0.0;
    detail += fmt("(i) %s: deadline x[%s] mean z [%s] rho %.2f, mean E [%s] rho %.2f", ok_i ? "ok" : "fails",
                  join(level, "%.3f").c_str(), join(z_i, "%.2f").c_str(), rho_z, join(e_i, "%.4g").c_str(), rho_e);

    // (ii) exceed-count against the finish-time multiplier
    const std::vector<double> mult{0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
    const auto z_ii = sweep_means(sweep(cfg, "finish_multiplier", mult), mult.size(), &MetricsRow::hard_z);
    bool ok_ii = z_ii.front() > z_ii.back();
    for (std::size_t j = 1; j < z_ii.size(); ++j) ok_ii = ok_ii && z_ii[j] <= z_ii[j - 1];
    detail += fmt("; (ii) %s: multiplier [%s] mean z [%s]", ok_ii ? "ok" : "fails", join(mult, "%.1f").c_str(),
                  join(z_ii, "%.2f").c_str());

    // (iii) speedup against subchannel count: single interior peak
    const std::vector<double> subs{6, 8, 12, 16, 24, 32};
    const auto s_iii = sweep_means(sweep(cfg, "subchannels", subs), subs.size(), &MetricsRow::latency_speedup);
    const auto peak = static_cast<std::size_t>(std::max_element(s_iii.begin(), s_iii.end()) - s_iii.begin());
    bool ok_iii = peak > 0 && peak + 1 < s_iii.size();
    for (std::size_t j = 1; j <= peak && ok_iii; ++j) ok_iii = s_iii[j] >= s_iii[j - 1];
    for (std::size_t j = peak + 1; j < s_iii.size() && ok_iii; ++j) ok_iii = s_iii[j] <= s_iii[j - 1];
    detail += fmt("; (iii) %s: M [%s] mean speedup [%s]", ok_iii ? "ok" : "fails", join(subs, "%.0f").c_str(),
                  join(s_iii, "%.3f").c_str());
    return {ok_i && ok_ii && ok_iii, detail};
}

Outcome baseline_sanity() {
    std::size_t variant = 0, checked = 0, beaten = 0;
    std::string worst;
    double worst_margin = -std::numeric_limits<double>::infinity();
    for (const char* name : {"desk.json", "tiny_oracle.json"}) {
        const auto cfg = config(name);
        for (auto seed : cfg.seeds) {
            const auto sc = build_scenario(cfg, seed);
            auto other = sc;
            other.channel = sample_channels(sc.topology, cfg.placement, seed + 1000);
            const auto d0 = device_only(sc), d1 = device_only(other);
            if (d0.gamma != d1.gamma || d0.totals.sum_t != d1.totals.sum_t || d0.totals.sum_e != d1.totals.sum_e ||
                d0.totals.hard_z != d1.totals.hard_z)
                ++variant;
            const double li = li_gd(sc, cfg.gd).gamma_rounded;
            for (const auto& b : {d0, edge_only(sc), exhaustive_split(sc)}) {
                ++checked;
                const double margin = (li - b.gamma) / std::abs(b.gamma);
                if (margin > worst_margin) {
                    worst_margin = margin;
                    worst = fmt("%s seed %llu vs %s", name, static_cast<unsigned long long>(seed), b.name.c_str());
                }
                beaten += li <= b.gamma ? 0 : 1;
            }
        }
    }
    return {variant == 0 && beaten == 0,
            fmt("device_only varies with channel on %zu scenarios; li_gd Gamma above a baseline in %zu of %zu "
                "comparisons (closest: %s, relative margin %.3e)",
                variant, beaten, checked, worst.c_str(), worst_margin)};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
        else {
            std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
            return 2;
        }
    }
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient fidelity", gradient_fidelity},
        {"sigmoid fixture", sigmoid_fixture},
        {"delay-bar arithmetic", figure_two},
        {"tiny-instance oracle gap", oracle_gap},
        {"warm-start iteration savings", warm_start_savings},
        {"convergence contract", convergence_contract},
        {"rounding-gap decay", rounding_gap_decay},
        {"trend reproduction", trend_reproduction},
        {"baseline sanity", baseline_sanity},
    };
    if (only < 0 || only > static_cast<int>(criteria.size())) {
        std::fprintf(stderr, "--only: expected 1..%zu\n", criteria.size());
        return 2;
    }
    bool all = true;
    for (std::size_t n = 0; n < criteria.size(); ++n) {
        if (only && static_cast<int>(n) + 1 != only) continue;
        Outcome o;
        try {
            o = criteria[n].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        all = all && o.pass;
        std::printf("criterion %zu %s: %s | %s\n", n + 1, criteria[n].first, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
