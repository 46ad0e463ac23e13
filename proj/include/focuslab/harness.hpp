#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "focuslab/focus.hpp"
#include "focuslab/instances.hpp"
#include "focuslab/mdp.hpp"

namespace focuslab {

struct HPolicy {
    enum class Kind { Explicit, Prior, PriorlessAvg, DiscountedNaive };
    Kind kind = Kind::Explicit;
    double value = 0.0; // only for Explicit

    static HPolicy explicit_value(double h) { return {Kind::Explicit, h}; }
    static HPolicy prior() { return {Kind::Prior, 0.0}; }
    static HPolicy priorless_avg() { return {Kind::PriorlessAvg, 0.0}; }
    static HPolicy discounted_naive() { return {Kind::DiscountedNaive, 0.0}; }
};

struct GammaPolicy {
    enum class Kind { Explicit, AvgMode };
    Kind kind = Kind::AvgMode;
    double value = 0.0; // only for Explicit

    static GammaPolicy explicit_value(double g) { return {Kind::Explicit, g}; }
    static GammaPolicy avg_mode() { return {Kind::AvgMode, 0.0}; }
};

std::string to_string(const HPolicy& policy);
std::string to_string(const GammaPolicy& policy);

/// Learner settings whose gamma and H are resolved per run.
struct AgentVariant {
    std::string label = "focus";
    HPolicy h_policy;
    GammaPolicy gamma_policy;
    double delta = 0.1;
    BonusKind bonus_kind = BonusKind::Bernstein;
    SolveMode solve_mode = SolveMode::Full;
    bool clip_enabled = true;
    ExitRule exit_rule = ExitRule::SandwichBounds;
    FocusConstants constants;
};

/// 1 - 1/T in avg mode.
double resolve_gamma(const GammaPolicy& policy, long T);
/// span_h is only consulted by the prior policy.
double resolve_H(const HPolicy& policy, int S, int A, long T, double gamma, std::optional<double> span_h);

struct RunConfig {
    AgentVariant agent;
    long horizon_T = 1;
    std::uint64_t seed = 0;
    /// Second key of the run's random stream.
    std::uint64_t ordinal = 0;
    /// Keep every Q-hat_k for the optimism audit.
    bool record_snapshots = false;
};

/// Oracle quantities for one instance at one discount factor.
struct Oracles {
    SolvedDiscounted discounted;
    GainBias gain_bias;
};

/// Accuracy of the harness oracles: V*_gamma to 1e-9 relative to 1/(1-gamma),
/// gain to 1e-7.
Oracles compute_oracles(const TabularMdp& mdp, double gamma, std::optional<GainBias> gain_bias = std::nullopt);
double discounted_oracle_tol(double gamma);
inline constexpr double kGainOracleTol = 1e-7;

struct Checkpoint {
    long t = 0;
    double avg_regret = 0.0;
    double gamma_regret = 0.0;
    double var_star = 0.0;
};

struct RunRecord {
    std::uint64_t seed = 0;
    long horizon_T = 0;
    double gamma = 0.0;
    double H = 0.0;
    int n_states = 0;
    int n_actions = 0;
    double delta = 0.0;
    double final_avg_regret = 0.0;
    double final_gamma_regret = 0.0;
    double cumulative_variance = 0.0;
    /// Sum over t of rho* - (1-gamma) V*_gamma(s_t), accumulated separately.
    double identity_term = 0.0;
    long episodes = 0;
    std::vector<Checkpoint> checkpoints;
    std::vector<EpisodeSnapshot> snapshots;
    double wall_time_s = 0.0;
};

/// Simulates one run. Throws OracleMismatch when the oracles were computed at
/// a different gamma than the one the config resolves to.
RunRecord run(const InstanceBundle& bundle, const RunConfig& config, const Oracles& oracles);

/// Every field except wall time agrees bit for bit.
bool same_outcome(const RunRecord& a, const RunRecord& b);

/// S A (floor(log2 T) + 1) + 1
long episode_bound(int S, int A, long T);

struct ReductionCheck {
    bool consistent = true;
    bool pass = false;
    double lhs = 0.0;   // Regret(T)
    double rhs = 0.0;   // (1-gamma) span(V*) T + Regret_gamma(T)
    double slack = 0.0; // (oracle tol + gain error bound) T
};

/// Regret(T) <= (1-gamma) span(V*_gamma) T + Regret_gamma(T). A record whose
/// regrets violate the identity with identity_term is reported inconsistent
/// and fails.
ReductionCheck check_reduction(const RunRecord& record, const Oracles& oracles);

/// Var*_gamma <= c (span_v T + span_v^2 ln(T / delta)).
bool check_var_bound(const RunRecord& record, double span_v, double c);
/// Smallest c for which check_var_bound passes.
double smallest_var_constant(const RunRecord& record, double span_v);

/// Episodes k with min over (s, a) of Q-hat_k - Q* + eps_k below -1e-9.
/// Throws SnapshotsMissing if the run kept no Q-hat snapshots.
long optimism_audit(const RunRecord& record, const QTable& q_star);

struct Stats {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation, 0 for one record
    double min = 0.0;
    double max = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
};

struct CellSummary {
    long n_seeds = 0;
    Stats avg_regret;
    Stats gamma_regret;
    double var_star_mean = 0.0;
    double episodes_mean = 0.0;
};

/// Records are sorted by seed first, so the result does not depend on their
/// order. Throws EmptyCell.
CellSummary aggregate(std::vector<RunRecord> records);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least squares of ln(regret) against ln(T). Throws NonpositiveRegret.
LineFit fit_loglog_slope(const std::vector<double>& T_grid, const std::vector<double>& mean_regrets);

struct RunJob {
    const InstanceBundle* bundle = nullptr;
    const Oracles* oracles = nullptr;
    RunConfig config;
    /// Prepended to the message of an Error the run throws.
    std::string context;
};

/// Runs jobs on `workers` threads. Results come back in job order; the first
/// failing job (by index) rethrows its exception.
std::vector<RunRecord> run_many(const std::vector<RunJob>& jobs, int workers);

} // namespace focuslab
