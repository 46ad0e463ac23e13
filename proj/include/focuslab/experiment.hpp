#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "focuslab/harness.hpp"
#include "focuslab/instances.hpp"
#include "focuslab/suites.hpp"

namespace focuslab {

/// A generated instance or an MDP file.
struct InstanceEntry {
    std::optional<InstanceSpec> spec;
    std::filesystem::path file;
};

InstanceBundle load_instance(const InstanceEntry& entry);

/// Config file (YAML, `version: 1`):
///
///   version: 1
///   output_dir: out/run
///   workers: 1
///   delta: 0.1                  # default for variants
///   snapshots: false            # keep Q-hat per episode for the optimism audit
///   checkpoints: true           # one CSV of cumulative regrets per run
///   var_bound_c: 10
///   instances:
///     - random_communicating:S=5,A=3,gamma_support=3,seed=1
///     - {family: two_state_pair, B: 5, member: 1}
///     - {file: my_mdp.json}
///   variants:
///     - label: focus
///       H: prior                # number | prior | priorless_avg | discounted_naive
///       gamma: avg_mode         # number | avg_mode
///       bonus: bernstein        # bernstein | hoeffding
///       solve: full             # full | one_step
///       clip: true
///       exit: sandwich          # sandwich | residual | exact_m
///       constants: {variance: 4, linear: 32, union: 9}
///   T_grid: [4096, 8192]
///   seeds: {base: 1, count: 10} # or a list
struct ExperimentConfig {
    std::vector<InstanceEntry> instances;
    std::vector<AgentVariant> variants;
    std::vector<long> T_grid;
    std::vector<std::uint64_t> seeds;
    double delta = 0.1;
    std::filesystem::path output_dir = "out";
    int workers = 1;
    bool snapshots = false;
    bool checkpoints = true;
    double var_bound_c = 10.0;

    /// Throws SchemaError on empty lists, repeated seeds or a T grid that is
    /// not strictly increasing.
    void validate() const;
};

/// Errors carry the field path and the line of the offending node.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");

struct RunRow {
    std::string instance_label;
    std::string variant_label;
    RunRecord record;
    bool reduction_check = false;
};

struct SummaryRow {
    std::string instance_label;
    std::string variant_label;
    long T = 0;
    CellSummary summary;
};

/// 17 significant digits.
std::string format_number(double x);

void write_runs_csv(std::ostream& out, const std::vector<RunRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_checkpoints_csv(std::ostream& out, const std::vector<Checkpoint>& checkpoints);

/// Opens `path` for writing or throws IoError.
void write_file(const std::filesystem::path& path, const std::string& contents);

struct ExperimentResult {
    std::vector<RunRow> runs;
    std::vector<SummaryRow> summaries;
    /// Filled in verify mode only.
    std::vector<CheckLine> checks;
    bool verified() const;
};

/// Runs instance x variant x T x seed, writes runs.csv, summary.csv and the
/// checkpoint files under output_dir. In verify mode every run is also
/// judged (reduction, variance bound, episode count, solve diagnostics and,
/// with snapshots, the optimism audit). Progress goes to `log`.
ExperimentResult execute(const ExperimentConfig& config, bool verify, std::ostream& log);

} // namespace focuslab
