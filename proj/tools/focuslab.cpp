// Command-line front end: solve, run, sweep, verify, export-instance.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "focuslab/error.hpp"
#include "focuslab/experiment.hpp"
#include "focuslab/suites.hpp"

using namespace focuslab;

namespace {

struct Overrides {
    std::string out;
    int workers = 0;
    std::optional<std::uint64_t> seed;
    bool snapshots = false;
    bool exact_m = false;
};

void apply(ExperimentConfig& cfg, const Overrides& o) {
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.workers > 0) cfg.workers = o.workers;
    if (o.seed) cfg.seeds = {*o.seed};
    if (o.snapshots) cfg.snapshots = true;
    if (o.exact_m) {
        for (auto& v : cfg.variants) v.exit_rule = ExitRule::ExactBudget;
    }
}

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
    cmd->add_option("--workers", o.workers, "Worker threads (overrides workers)")->check(CLI::PositiveNumber);
    cmd->add_option("--seed-override", o.seed, "Run this single seed instead of the configured ones");
    cmd->add_flag("--snapshots", o.snapshots, "Keep Q-hat per episode and run the optimism audit");
    cmd->add_flag("--exact-m", o.exact_m, "Always apply the operator exactly m times");
}

InstanceEntry instance_arg(const std::string& spec, const std::string& file) {
    InstanceEntry e;
    if (!file.empty()) e.file = file;
    else e.spec = parse_instance_spec(spec);
    return e;
}

void print_vector(const char* name, const Eigen::VectorXd& v) {
    std::cout << name << " =";
    for (Eigen::Index i = 0; i < v.size(); ++i) std::cout << ' ' << format_number(v(i));
    std::cout << '\n';
}

int print_checks(const std::vector<CheckLine>& checks) {
    bool ok = true;
    for (const auto& c : checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
        ok = ok && c.pass;
    }
    return ok ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FOCUS tabular reinforcement-learning lab"};
    app.require_subcommand(1);

    std::string instance;
    std::string mdp_file;
    std::optional<double> gamma;
    auto* solve = app.add_subcommand("solve", "Print gain, bias span and (with --gamma) V* for an instance");
    solve->add_option("--instance", instance, "Instance, e.g. two_state_pair:B=5,member=1");
    solve->add_option("--mdp", mdp_file, "MDP file instead of a generated instance");
    solve->add_option("--gamma", gamma, "Also solve the discounted problem");

    std::string config_path;
    Overrides overrides;

    auto* run_cmd = app.add_subcommand("run", "Run one cell (one instance, variant and T) of a config");
    run_cmd->add_option("--config", config_path, "Experiment config")->required();
    add_overrides(run_cmd, overrides);

    auto* sweep = app.add_subcommand("sweep", "Run the full cross product of a config");
    sweep->add_option("--config", config_path, "Experiment config")->required();
    add_overrides(sweep, overrides);

    std::string suite = "all";
    long draws = 1000;
    auto* verify = app.add_subcommand("verify", "Operator and oracle suites; with --config, also judge every run");
    verify->add_option("--config", config_path, "Experiment config to run in verify mode");
    verify->add_option("--suite", suite, "Built-in suites to run")
        ->check(CLI::IsMember({"all", "operator", "oracle", "none"}));
    verify->add_option("--draws", draws, "Random agents in the operator suite")->check(CLI::PositiveNumber);
    add_overrides(verify, overrides);

    std::string export_out;
    auto* export_cmd = app.add_subcommand("export-instance", "Write an instance in the MDP file format");
    export_cmd->add_option("--instance", instance, "Instance spec")->required();
    export_cmd->add_option("--out", export_out, "Output file (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            if (instance.empty() == mdp_file.empty()) {
                std::cerr << "error: give exactly one of --instance and --mdp\n";
                return 1;
            }
            const InstanceBundle bundle = load_instance(instance_arg(instance, mdp_file));
            const GainBias gb = solve_gain_bias(bundle.mdp, kGainOracleTol);
            std::cout << "instance = " << bundle.label << '\n'
                      << "rho_star = " << format_number(gb.rho_star) << '\n'
                      << "span_h = " << format_number(gb.span_h) << '\n'
                      << "gain_error_bound = " << format_number(gb.error_bound) << '\n';
            print_vector("h_shifted", gb.h_shifted);
            if (gamma) {
                const SolvedDiscounted sd = solve_discounted(bundle.mdp, *gamma, discounted_oracle_tol(*gamma));
                std::cout << "gamma = " << format_number(*gamma) << '\n'
                          << "span_v = " << format_number(sd.span_v) << '\n';
                print_vector("v_star", sd.v_star);
            }
            return 0;
        }
        if (export_cmd->parsed()) {
            const InstanceBundle bundle = build_instance(parse_instance_spec(instance));
            if (export_out.empty()) write_mdp(std::cout, bundle.mdp);
            else write_mdp_file(export_out, bundle.mdp);
            return 0;
        }
        if (run_cmd->parsed() || sweep->parsed()) {
            ExperimentConfig cfg = parse_config(config_path);
            apply(cfg, overrides);
            if (run_cmd->parsed() &&
                (cfg.instances.size() != 1 || cfg.variants.size() != 1 || cfg.T_grid.size() != 1)) {
                throw Error(ErrorCode::SchemaError,
                            "run expects exactly one instance, one variant and one T; use sweep for grids");
            }
            execute(cfg, false, std::cerr);
            return 0;
        }
        if (verify->parsed()) {
            std::vector<CheckLine> checks;
            if (suite == "all" || suite == "operator") {
                const OperatorSuiteResult r = operator_property_suite(draws);
                checks.push_back({"operator constant shift", r.shift_failures == 0,
                                  std::to_string(r.shift_failures) + " failures, worst error " +
                                      format_number(r.worst_shift_error)});
                checks.push_back({"operator contraction", r.contraction_failures == 0,
                                  std::to_string(r.contraction_failures) + " failures, worst ratio - gamma " +
                                      format_number(r.worst_ratio_minus_gamma)});
                checks.push_back({"operator monotonicity", r.monotone_failures == 0,
                                  std::to_string(r.monotone_failures) + " failures"});
            }
            if (suite == "all" || suite == "oracle") {
                for (auto& c : oracle_crosscheck_suite()) checks.push_back(std::move(c));
            }
            if (!config_path.empty()) {
                ExperimentConfig cfg = parse_config(config_path);
                apply(cfg, overrides);
                ExperimentResult res = execute(cfg, true, std::cerr);
                for (auto& c : res.checks) checks.push_back(std::move(c));
            }
            return print_checks(checks);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
