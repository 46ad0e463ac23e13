#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "focuslab/error.hpp"
#include "focuslab/experiment.hpp"

using namespace focuslab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("focuslab_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string drop_last_column(const std::string& line) { return line.substr(0, line.rfind(',')); }

const char* kMinimal = R"(version: 1
instances:
  - two_state_pair:B=5,member=1
variants:
  - label: focus
    H: 10
    gamma: 0.99
T_grid: [500]
seeds: [3]
)";

Error parse_error(const std::string& text) {
    try {
        (void)parse_config_text(text, "cfg.yaml");
    } catch (const Error& e) {
        return e;
    }
    FAIL("config was accepted");
    return Error(ErrorCode::InvalidArgument, "");
}

} // namespace

TEST_CASE("minimal config") {
    const ExperimentConfig c = parse_config_text(kMinimal);
    REQUIRE(c.instances.size() == 1);
    CHECK(c.instances[0].spec->family == Family::TwoStatePair);
    REQUIRE(c.variants.size() == 1);
    CHECK(c.variants[0].h_policy.kind == HPolicy::Kind::Explicit);
    CHECK(c.variants[0].h_policy.value == 10.0);
    CHECK(c.variants[0].gamma_policy.value == 0.99);
    CHECK(c.T_grid == std::vector<long>{500});
    CHECK(c.seeds == std::vector<std::uint64_t>{3});
    CHECK(c.workers == 1);
}

TEST_CASE("config mappings and seed ranges") {
    const ExperimentConfig c = parse_config_text(R"(version: 1
delta: 0.05
instances:
  - {family: random_communicating, S: 4, A: 2, gamma_support: 2, seed: 9}
variants:
  - {label: a, H: prior, gamma: avg_mode, bonus: hoeffding, solve: one_step, clip: false, exit: residual}
  - {label: b, H: priorless_avg, constants: {variance: 2, linear: 16, union: 9}}
T_grid: [64, 128]
seeds: {base: 10, count: 3}
)");
    CHECK(c.seeds == std::vector<std::uint64_t>{10, 11, 12});
    CHECK(c.instances[0].spec->S == 4);
    CHECK(c.variants[0].bonus_kind == BonusKind::Hoeffding);
    CHECK(c.variants[0].solve_mode == SolveMode::OneStep);
    CHECK_FALSE(c.variants[0].clip_enabled);
    CHECK(c.variants[0].exit_rule == ExitRule::Residual);
    CHECK(c.variants[0].delta == 0.05);
    CHECK(c.variants[1].h_policy.kind == HPolicy::Kind::PriorlessAvg);
    CHECK(c.variants[1].constants.linear_coef == 16.0);
}

TEST_CASE("config schema errors") {
    std::string repeated = kMinimal;
    repeated.replace(repeated.find("[500]"), 5, "[100, 100]");
    CHECK(parse_error(repeated).code() == ErrorCode::SchemaError);

    std::string typo = kMinimal;
    typo.replace(typo.find("gamma: 0.99"), 5, "gama");
    const Error e = parse_error(typo);
    CHECK(e.code() == ErrorCode::SchemaError);
    const std::string msg = e.what();
    CHECK(msg.find("gama") != std::string::npos);
    CHECK(msg.find("cfg.yaml:7:") != std::string::npos);

    std::string unversioned = kMinimal;
    unversioned.erase(0, unversioned.find('\n') + 1);
    CHECK(parse_error(unversioned).code() == ErrorCode::SchemaError);

    std::string no_h = kMinimal;
    no_h.replace(no_h.find("    H: 10\n"), 10, "");
    CHECK(parse_error(no_h).code() == ErrorCode::SchemaError);

    std::string short_T = kMinimal;
    short_T.replace(short_T.find("[500]"), 5, "[1]");
    CHECK(parse_error(short_T).code() == ErrorCode::SchemaError);

    CHECK(parse_error("version: 1\ninstances: [\n").code() == ErrorCode::ParseError);
}

TEST_CASE("CSV headers") {
    std::ostringstream runs;
    write_runs_csv(runs, {});
    CHECK(runs.str() ==
          "instance_label,variant_label,T,seed,gamma,H,avg_regret,gamma_regret,var_star,episodes,"
          "reduction_check,wall_time_s\n");

    std::ostringstream summary;
    write_summary_csv(summary, {});
    CHECK(summary.str() ==
          "instance_label,variant_label,T,n_seeds,avg_regret_mean,avg_regret_std,gamma_regret_mean,"
          "gamma_regret_std,var_star_mean,episodes_mean\n");

    std::ostringstream cps;
    write_checkpoints_csv(cps, {{1, 0.5, 0.25, 0.0}});
    CHECK(lines(cps.str()) == std::vector<std::string>{"t,cum_avg_regret,cum_gamma_regret,cum_var_star", "1,0.5,0.25,0"});

    RunRow row{"a,b", "v", {}, true};
    row.record.horizon_T = 10;
    std::ostringstream one;
    write_runs_csv(one, {row});
    const auto ls = lines(one.str());
    REQUIRE(ls.size() == 2);
    CHECK(ls[1].rfind("\"a,b\",v,10,", 0) == 0);
    CHECK(ls[1].find(",pass,") != std::string::npos);
}

TEST_CASE("numbers keep 17 significant digits") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_number(2.0) == "2");
}

TEST_CASE("execute writes one row per run and is reproducible") {
    const fs::path dir = scratch("exec");
    ExperimentConfig c = parse_config_text(kMinimal);
    c.output_dir = dir;
    std::ostringstream log;
    const ExperimentResult r1 = execute(c, true, log);
    CHECK(r1.runs.size() == 1);
    CHECK(r1.summaries.size() == 1);
    CHECK(r1.verified());
    CHECK_FALSE(r1.checks.empty());

    const std::string runs1 = slurp(dir / "runs.csv");
    const std::string summary1 = slurp(dir / "summary.csv");
    CHECK(lines(runs1).size() == 2);
    CHECK(lines(summary1).size() == 2);
    CHECK(fs::exists(dir / "checkpoints"));
    CHECK(std::distance(fs::directory_iterator(dir / "checkpoints"), fs::directory_iterator{}) == 1);

    (void)execute(c, false, log);
    const auto a = lines(runs1);
    const auto b = lines(slurp(dir / "runs.csv"));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(drop_last_column(a[i]) == drop_last_column(b[i]));
    CHECK(slurp(dir / "summary.csv") == summary1);
    fs::remove_all(dir);
}

TEST_CASE("workers do not change the output") {
    const char* text = R"(version: 1
instances:
  - random_communicating:S=4,A=2,gamma_support=2,seed=3
variants:
  - {label: focus, H: prior}
T_grid: [256, 512]
seeds: {base: 1, count: 4}
checkpoints: false
)";
    ExperimentConfig c = parse_config_text(text);
    std::ostringstream log;
    c.output_dir = scratch("serial");
    (void)execute(c, false, log);
    const std::string serial = slurp(c.output_dir / "summary.csv");
    fs::remove_all(c.output_dir);
    c.output_dir = scratch("parallel");
    c.workers = 3;
    (void)execute(c, false, log);
    CHECK(slurp(c.output_dir / "summary.csv") == serial);
    CHECK(lines(serial).size() == 3);
    fs::remove_all(c.output_dir);
}

TEST_CASE("unwritable output directory") {
    const fs::path base = scratch("blocked");
    fs::create_directories(base);
    write_file(base / "plain_file", "x");
    ExperimentConfig c = parse_config_text(kMinimal);
    c.output_dir = base / "plain_file" / "out";
    std::ostringstream log;
    try {
        (void)execute(c, false, log);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
    CHECK_THROWS_AS(write_file(base / "missing" / "x.csv", ""), Error);
    fs::remove_all(base);
}

TEST_CASE("MDP file instances") {
    const fs::path dir = scratch("mdpfile");
    fs::create_directories(dir);
    const InstanceBundle b = build_instance(parse_instance_spec("two_state_pair:B=5,member=2"));
    write_mdp_file(dir / "m.json", b.mdp);
    InstanceEntry entry;
    entry.file = dir / "m.json";
    const InstanceBundle loaded = load_instance(entry);
    CHECK(loaded.mdp.reward == b.mdp.reward);
    CHECK_FALSE(loaded.known_gain.has_value());
    fs::remove_all(dir);
}
