#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "focuslab/operators.hpp"

namespace focuslab {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class BonusKind { Bernstein, Hoeffding };
enum class SolveMode { Full, OneStep };

/// How the per-episode fixed-point solve may stop before the full budget m.
enum class ExitRule {
    /// Exactly m applications of the operator from the zero table.
    ExactBudget,
    /// Stop once gamma / (1 - gamma) * ||Q_{j+1} - Q_j||_inf <= eps_k.
    Residual,
    /// Stop once the contraction sandwich around the fixed point is narrower
    /// than eps_k and return its lower edge.
    SandwichBounds,
};

std::string to_string(BonusKind kind);
std::string to_string(SolveMode mode);
std::string to_string(ExitRule rule);

/// Constants of the bonus and of the confidence level. The defaults are the
/// algorithm's own; changing them is for ablations.
struct FocusConstants {
    double variance_coef = 4.0;
    double linear_coef = 32.0;
    double union_coef = 9.0;
};

struct FocusConfig {
    long horizon_T = 1;
    double gamma = 0.99;
    double delta = 0.1;
    double H = 1.0;
    BonusKind bonus_kind = BonusKind::Bernstein;
    SolveMode solve_mode = SolveMode::Full;
    bool clip_enabled = true;
    ExitRule exit_rule = ExitRule::SandwichBounds;
    FocusConstants constants;
    /// Keep a copy of every Q-hat_k (S*A doubles per episode).
    bool record_q_snapshots = false;

    void validate() const;
};

/// Bonus b(s, a, V) for a pair visited n times whose empirical next-state
/// distribution is p_hat_row.
double bonus(std::int64_t n, const Eigen::Ref<const Eigen::RowVectorXd>& p_hat_row, const ValueVector& v,
             double H, double U, BonusKind kind, const FocusConstants& constants = {});

/// m = ceil( 1/(1-gamma) * ln( (1 + 32 H U) / (eps (1-gamma)) ) ), at least 1.
long iteration_budget(double gamma, double epsilon, double H, double U, double linear_coef = 32.0);

/// Per-episode log entry.
struct EpisodeSnapshot {
    long k = 0;
    long t = 0;
    double epsilon = 0.0;
    double q_sup = 0.0;
    double v_span = 0.0;
    long iterations = 0;
    long budget = 0;
    bool early_exit = false;
    /// Every iterate of the solve was entrywise >= its predecessor.
    bool iterates_monotone = true;
    /// ||Q-hat_k||_inf <= (1 + 32 H U) / (1 - gamma).
    bool within_norm_bound = true;
    /// Q-hat_k <= T_k(Q-hat_k) entrywise.
    bool sub_solution = true;
    std::optional<QTable> q_hat;
};

/// Result of one fixed-point solve of the episode operator.
struct EpisodeSolve {
    QTable q;
    long iterations = 0;
    long budget = 0;
    bool early_exit = false;
    bool iterates_monotone = true;
    bool sub_solution = true;
};

/// The learner: visit counts, empirical kernel, doubling episodes and the
/// clipped optimistic Bellman operator. One instance drives one run.
class FocusAgent {
public:
    /// Fresh agent: zero counts, Q-hat_1 = 1/(1-gamma) everywhere, k = 1.
    /// The reward table (S x A) is known to the learner.
    FocusAgent(FocusConfig config, Eigen::MatrixXd reward);

    /// Agent whose episode model is built from the given next-state counts
    /// (one S x S matrix per action) as if an episode had just started at
    /// time t. Q-hat is left at its initial value; no solve is run.
    static FocusAgent with_counts(FocusConfig config, Eigen::MatrixXd reward,
                                  const std::vector<CountMatrix>& counts_sas, long t);

    /// Greedy action at s, lowest index on ties.
    int act(int s) const { return policy_[static_cast<std::size_t>(s)]; }

    /// Record the transition (s, a, s_next) taken at step t (1-based). Returns
    /// true when the updated count is a power of two and a new episode began.
    bool observe(int s, int a, int s_next, long t);

    /// One exact application of the current episode operator.
    QTable apply_operator(const QTable& q) const;

    /// Solve for the current episode per solve_mode and exit_rule. Does not
    /// modify the agent.
    EpisodeSolve solve_episode() const;

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    const FocusConfig& config() const { return config_; }
    const Eigen::MatrixXd& reward() const { return reward_; }

    const CountMatrix& counts_sa() const { return counts_sa_; }
    const std::vector<CountMatrix>& counts_sas() const { return counts_sas_; }
    const CountMatrix& episode_counts() const { return episode_counts_; }
    const std::vector<Eigen::MatrixXd>& p_hat() const { return p_hat_; }
    const QTable& q_hat() const { return q_hat_; }
    ValueVector v_hat() const;

    long episode() const { return episode_k_; }
    long steps_observed() const { return steps_; }
    double U() const { return U_; }
    double delta_prime() const { return delta_prime_; }
    double epsilon() const { return epsilon_; }
    /// H used inside the bonus: H itself, or 1/(1-gamma) with clipping off.
    double bonus_H() const { return bonus_H_; }
    /// (1 + 32 H U) / (1 - gamma)
    double q_norm_bound() const;

    const std::vector<EpisodeSnapshot>& snapshots() const { return snapshots_; }

private:
    void rebuild_model();
    void start_episode(long t);
    void refresh_policy();
    void log_episode(long t, const EpisodeSolve* solve);
    ValueVector clipped_max(const QTable& q) const;
    /// T_k applied to a table whose greedy values are already known.
    QTable apply_to_values(const ValueVector& v) const;

    FocusConfig config_;
    int n_states_;
    int n_actions_;
    Eigen::MatrixXd reward_;

    CountMatrix counts_sa_;
    std::vector<CountMatrix> counts_sas_;
    CountMatrix episode_counts_;
    Eigen::MatrixXd visit_divisor_; // max(N_k(s, a), 1)
    std::vector<Eigen::MatrixXd> p_hat_;

    long episode_k_ = 1;
    long steps_ = 0;
    double delta_prime_;
    double U_;
    double epsilon_ = 0.0;
    double bonus_H_;

    QTable q_hat_;
    Policy policy_;
    std::vector<EpisodeSnapshot> snapshots_;
};

} // namespace focuslab
