// Command-line front end: run, sweep, baselines, gradcheck, oracle, trace.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qsplit/qsplit.hpp"

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
    cmd->add_option("--config", c.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Run a single seed instead of the config's list");
    if (with_out) cmd->add_option("--out", c.out, "Output CSV path (stdout when omitted)");
}

qsplit::ScenarioConfig load(const Common& c) {
    auto cfg = qsplit::load_config(c.config);
    if (c.seed) cfg.seeds = {*c.seed};
    return cfg;
}

void emit_rows(const Common& c, const qsplit::ScenarioConfig& cfg, const std::vector<qsplit::MetricsRow>& rows,
               const std::string& axis = {}) {
    if (c.out.empty()) {
        qsplit::write_csv(std::cout, rows);
        return;
    }
    std::ofstream f(c.out);
    if (!f) throw qsplit::ParseError("--out: cannot write '" + c.out + "'");
    qsplit::write_csv(f, rows);
    std::ofstream meta(c.out + ".meta.json");
    meta << qsplit::run_metadata(cfg, axis).dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"QoE-aware split inference optimizer for NOMA edge networks"};
    app.require_subcommand(1);

    Common run_opt, sweep_opt, base_opt, grad_opt, oracle_opt, trace_opt;
    auto* run_cmd = app.add_subcommand("run", "Run every configured strategy per seed");
    add_common(run_cmd, run_opt);

    auto* sweep_cmd = app.add_subcommand("sweep", "Re-run with one config axis substituted");
    add_common(sweep_cmd, sweep_opt);
    std::string axis;
    std::vector<double> values;
    sweep_cmd->add_option("--axis", axis, "qoe_threshold | finish_multiplier | users | subchannels | workload")
        ->required()
        ->check(CLI::IsMember(qsplit::sweep_axes()));
    sweep_cmd->add_option("--values", values, "Axis values")->required()->delimiter(',');

    auto* base_cmd = app.add_subcommand("baselines", "Run only the fixed-policy baselines");
    add_common(base_cmd, base_opt);

    auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
    add_common(grad_cmd, grad_opt, false);
    std::optional<std::size_t> points;
    std::optional<double> tol;
    grad_cmd->add_option("--points", points, "Number of random interior points");
    grad_cmd->add_option("--tol", tol, "Relative tolerance");

    auto* oracle_cmd = app.add_subcommand("oracle", "Compare li_gd with the exhaustive grid optimum");
    add_common(oracle_cmd, oracle_opt, false);

    auto* trace_cmd = app.add_subcommand("trace", "Per-iteration li_gd trace (layer, iter, gamma, grad_norm)");
    add_common(trace_cmd, trace_opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            const auto cfg = load(run_opt);
            emit_rows(run_opt, cfg, qsplit::run(cfg));
        } else if (*sweep_cmd) {
            const auto cfg = load(sweep_opt);
            emit_rows(sweep_opt, cfg, qsplit::sweep(cfg, axis, values), axis);
        } else if (*base_cmd) {
            auto cfg = load(base_opt);
            cfg.strategies = {"device_only", "edge_only", "exhaustive_split"};
            emit_rows(base_opt, cfg, qsplit::run(cfg));
        } else if (*grad_cmd) {
            const auto cfg = load(grad_opt);
            const auto rep = qsplit::gradcheck(cfg, points.value_or(cfg.gradcheck.points),
                                               tol.value_or(cfg.gradcheck.tolerance));
            std::cout << "points " << rep.points << " (excluded " << rep.excluded << "), coordinates "
                      << rep.coordinates << ", failures " << rep.failures << ", worst relative error "
                      << rep.worst_error << '\n';
            for (const auto& d : rep.details) std::cout << "  " << d << '\n';
            std::cout << (rep.pass() ? "PASS" : "FAIL") << '\n';
            return rep.pass() ? 0 : 1;
        } else if (*oracle_cmd) {
            const auto cfg = load(oracle_opt);
            const auto rep = qsplit::oracle_check(cfg);
            for (const auto& s : rep.seeds)
                std::cout << "seed " << s.seed << ": oracle " << qsplit::format_double(s.oracle_gamma) << ", li_gd "
                          << qsplit::format_double(s.ligd_gamma) << ", gap " << s.gap << " (" << s.evaluations
                          << " evaluations)\n";
            std::cout << "max gap " << rep.max_gap << " bound " << rep.bound << ' ' << (rep.pass() ? "PASS" : "FAIL")
                      << '\n';
            return rep.pass() ? 0 : 1;
        } else if (*trace_cmd) {
            const auto cfg = load(trace_opt);
            const auto sc = qsplit::scenario_for(cfg, cfg.seeds.front());
            const auto r = qsplit::li_gd(sc, cfg.gd);
            if (trace_opt.out.empty()) {
                qsplit::write_trace(std::cout, r);
            } else {
                std::ofstream f(trace_opt.out);
                if (!f) throw qsplit::ParseError("--out: cannot write '" + trace_opt.out + "'");
                qsplit::write_trace(f, r);
            }
        }
    } catch (const qsplit::BudgetExceeded& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return 3;
    } catch (const qsplit::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const qsplit::ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
