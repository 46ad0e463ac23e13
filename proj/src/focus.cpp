#include "focuslab/focus.hpp"

#include <cmath>

#include "focuslab/error.hpp"
#include "focuslab/fixed_point.hpp"

namespace focuslab {

std::string to_string(BonusKind kind) {
    return kind == BonusKind::Bernstein ? "bernstein" : "hoeffding";
}

std::string to_string(SolveMode mode) {
    return mode == SolveMode::Full ? "full" : "one_step";
}

std::string to_string(ExitRule rule) {
    switch (rule) {
    case ExitRule::ExactBudget: return "exact_m";
    case ExitRule::Residual: return "residual";
    case ExitRule::SandwichBounds: return "sandwich";
    }
    return "unknown";
}

void FocusConfig::validate() const {
    if (horizon_T < 1) throw Error(ErrorCode::InvalidArgument, "horizon T must be at least 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::InvalidArgument, "delta must lie in (0,1)");
    if (!(H >= 1.0) || !std::isfinite(H)) throw Error(ErrorCode::InvalidArgument, "H must be a finite value >= 1");
    if (!(constants.variance_coef >= 0.0 && constants.linear_coef >= 0.0 && constants.union_coef > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "bonus constants must be nonnegative");
    }
}

double bonus(std::int64_t n, const Eigen::Ref<const Eigen::RowVectorXd>& p_hat_row, const ValueVector& v,
             double H, double U, BonusKind kind, const FocusConstants& constants) {
    const double visits = static_cast<double>(std::max<std::int64_t>(n, 1));
    if (kind == BonusKind::Hoeffding) {
        return constants.variance_coef * H * std::sqrt(U / visits);
    }
    const double var = variance(p_hat_row, v);
    return std::max(constants.variance_coef * std::sqrt(var * U / visits),
                    constants.linear_coef * H * U / visits);
}

long iteration_budget(double gamma, double epsilon, double H, double U, double linear_coef) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::NonpositiveArgument, "gamma must lie in (0,1)");
    if (!(epsilon > 0.0 && H > 0.0 && U > 0.0)) {
        throw Error(ErrorCode::NonpositiveArgument, "epsilon, H and U must be positive");
    }
    const double one_minus = 1.0 - gamma;
    const double m = std::ceil(std::log((1.0 + linear_coef * H * U) / (epsilon * one_minus)) / one_minus);
    return std::max(1L, static_cast<long>(m));
}

// ---------------------------------------------------------------------------

FocusAgent::FocusAgent(FocusConfig config, Eigen::MatrixXd reward)
    : config_(config), n_states_(static_cast<int>(reward.rows())), n_actions_(static_cast<int>(reward.cols())),
      reward_(std::move(reward)) {
    config_.validate();
    if (n_states_ < 1 || n_actions_ < 1) throw Error(ErrorCode::DimensionMismatch, "empty reward table");

    const double S = n_states_;
    const double A = n_actions_;
    delta_prime_ = config_.delta / (config_.constants.union_coef * S * S * A * static_cast<double>(config_.horizon_T));
    U_ = std::log(1.0 / delta_prime_);
    bonus_H_ = config_.clip_enabled ? config_.H : 1.0 / (1.0 - config_.gamma);

    counts_sa_ = CountMatrix::Zero(n_states_, n_actions_);
    counts_sas_.assign(static_cast<std::size_t>(n_actions_), CountMatrix::Zero(n_states_, n_states_));
    episode_counts_ = counts_sa_;
    rebuild_model();

    q_hat_ = QTable::Constant(n_states_, n_actions_, 1.0 / (1.0 - config_.gamma));
    refresh_policy();
    log_episode(0, nullptr);
}

FocusAgent FocusAgent::with_counts(FocusConfig config, Eigen::MatrixXd reward,
                                   const std::vector<CountMatrix>& counts_sas, long t) {
    FocusAgent agent(config, std::move(reward));
    if (static_cast<int>(counts_sas.size()) != agent.n_actions_) {
        throw Error(ErrorCode::DimensionMismatch, "need one count matrix per action");
    }
    for (int a = 0; a < agent.n_actions_; ++a) {
        const auto& c = counts_sas[static_cast<std::size_t>(a)];
        if (c.rows() != agent.n_states_ || c.cols() != agent.n_states_ || c.minCoeff() < 0) {
            throw Error(ErrorCode::DimensionMismatch, "count matrices must be S x S and nonnegative");
        }
        agent.counts_sas_[static_cast<std::size_t>(a)] = c;
        agent.counts_sa_.col(a) = c.rowwise().sum();
    }
    agent.steps_ = agent.counts_sa_.sum();
    if (t < 1) throw Error(ErrorCode::InvalidArgument, "t must be positive");
    agent.episode_k_ = 2;
    agent.epsilon_ = 1.0 / (static_cast<double>(t) * (1.0 - agent.config_.gamma));
    agent.episode_counts_ = agent.counts_sa_;
    agent.rebuild_model();
    agent.snapshots_.clear();
    return agent;
}

void FocusAgent::rebuild_model() {
    const double uniform = 1.0 / n_states_;
    p_hat_.resize(static_cast<std::size_t>(n_actions_));
    visit_divisor_.resize(n_states_, n_actions_);
    for (int a = 0; a < n_actions_; ++a) {
        auto& P = p_hat_[static_cast<std::size_t>(a)];
        P.resize(n_states_, n_states_);
        const auto& counts = counts_sas_[static_cast<std::size_t>(a)];
        for (int s = 0; s < n_states_; ++s) {
            const std::int64_t n = episode_counts_(s, a);
            visit_divisor_(s, a) = static_cast<double>(std::max<std::int64_t>(n, 1));
            if (n == 0) {
                P.row(s).setConstant(uniform);
            } else {
                P.row(s) = counts.row(s).cast<double>() / static_cast<double>(n);
            }
        }
    }
}

bool FocusAgent::observe(int s, int a, int s_next, long t) {
    if (s < 0 || s >= n_states_ || s_next < 0 || s_next >= n_states_ || a < 0 || a >= n_actions_) {
        throw Error(ErrorCode::InvalidArgument, "transition indices out of range");
    }
    const std::int64_t n = ++counts_sa_(s, a);
    ++counts_sas_[static_cast<std::size_t>(a)](s, s_next);
    ++steps_;
    if ((n & (n - 1)) != 0) return false;
    start_episode(t);
    return true;
}

void FocusAgent::start_episode(long t) {
    ++episode_k_;
    epsilon_ = 1.0 / (static_cast<double>(t) * (1.0 - config_.gamma));
    // Between episodes only the counts move; the snapshot is taken here.
    episode_counts_ = counts_sa_;
    rebuild_model();
    EpisodeSolve solve = solve_episode();
    q_hat_ = std::move(solve.q);
    refresh_policy();
    log_episode(t, &solve);
}

void FocusAgent::refresh_policy() {
    policy_ = greedy(q_hat_).policy;
}

void FocusAgent::log_episode(long t, const EpisodeSolve* solve) {
    EpisodeSnapshot snap;
    snap.k = episode_k_;
    snap.t = t;
    snap.epsilon = epsilon_;
    snap.q_sup = q_hat_.cwiseAbs().maxCoeff();
    snap.v_span = span(v_hat());
    snap.within_norm_bound = snap.q_sup <= q_norm_bound() * (1.0 + 1e-12);
    if (solve != nullptr) {
        snap.iterations = solve->iterations;
        snap.budget = solve->budget;
        snap.early_exit = solve->early_exit;
        snap.iterates_monotone = solve->iterates_monotone;
        snap.sub_solution = solve->sub_solution;
    }
    if (config_.record_q_snapshots) snap.q_hat = q_hat_;
    snapshots_.push_back(std::move(snap));
}

double FocusAgent::q_norm_bound() const {
    return (1.0 + config_.constants.linear_coef * bonus_H_ * U_) / (1.0 - config_.gamma);
}

ValueVector FocusAgent::clipped_max(const QTable& q) const {
    ValueVector v = max_over_actions(q);
    if (config_.clip_enabled) return clip(v, config_.H);
    return v;
}

ValueVector FocusAgent::v_hat() const {
    return clipped_max(q_hat_);
}

QTable FocusAgent::apply_to_values(const ValueVector& v) const {
    // P-hat rows sum to one, so P-hat V = P-hat (V - base) + base. Centering
    // keeps the variance free of cancellation when V is of order 1/(1-gamma).
    const double base = v.minCoeff();
    const ValueVector centered = v.array() - base;
    const ValueVector centered_sq = centered.cwiseAbs2();
    const double gamma = config_.gamma;
    const double U = U_;
    const double H = bonus_H_;
    const auto& c = config_.constants;

    QTable out(n_states_, n_actions_);
    for (int a = 0; a < n_actions_; ++a) {
        const auto& P = p_hat_[static_cast<std::size_t>(a)];
        const Eigen::VectorXd mean = P * centered;
        const Eigen::ArrayXd n = visit_divisor_.col(a).array();
        Eigen::ArrayXd b;
        if (config_.bonus_kind == BonusKind::Hoeffding) {
            b = c.variance_coef * H * (U / n).sqrt();
        } else {
            const Eigen::ArrayXd var = ((P * centered_sq).array() - mean.array().square()).max(0.0);
            b = (c.variance_coef * (var * U / n).sqrt()).max(c.linear_coef * H * U / n);
        }
        out.col(a) = reward_.col(a).array() + gamma * (mean.array() + base + b);
    }
    return out;
}

QTable FocusAgent::apply_operator(const QTable& q) const {
    if (q.rows() != n_states_ || q.cols() != n_actions_) {
        throw Error(ErrorCode::DimensionMismatch, "Q-table shape does not match the agent");
    }
    return apply_to_values(clipped_max(q));
}

EpisodeSolve FocusAgent::solve_episode() const {
    const double gamma = config_.gamma;
    EpisodeSolve out;

    if (config_.solve_mode == SolveMode::OneStep) {
        out.q = apply_operator(q_hat_);
        out.iterations = 1;
        out.budget = 1;
        const QTable image = apply_operator(out.q);
        out.sub_solution = (image - out.q).minCoeff() >= -1e-9 * (1.0 + out.q.cwiseAbs().maxCoeff());
        return out;
    }

    out.budget = iteration_budget(gamma, epsilon_, bonus_H_, U_, config_.constants.linear_coef);

    // Iterate from the zero table in relative form: Q_j = R_j + level_j with
    // min R_j = 0, using T(R + c) = T(R) + gamma c.
    ShiftBounds<QTable> bounds(gamma, n_states_);
    QTable relative = QTable::Zero(n_states_, n_actions_);
    double level = 0.0;
    double offset = 0.0;
    bounds.push(relative, 0.0);

    for (long j = 1; j <= out.budget; ++j) {
        QTable next = apply_operator(relative);
        const double floor = next.minCoeff();
        relative = next.array() - floor;
        const double increment = floor - (1.0 - gamma) * level;
        level += increment;
        bounds.push(relative, increment);
        out.iterations = j;

        const auto step = bounds.last_step();
        const double slack = 1e-9 * (1.0 + relative.maxCoeff() + std::abs(floor));
        if (step.lo < -slack) out.iterates_monotone = false;

        if (config_.exit_rule == ExitRule::Residual) {
            if (gamma / (1.0 - gamma) * step.sup() <= epsilon_) {
                out.early_exit = j < out.budget;
                break;
            }
        } else if (config_.exit_rule == ExitRule::SandwichBounds) {
            const auto off = bounds.offsets();
            if (off.width() <= epsilon_) {
                offset = off.lower;
                out.early_exit = j < out.budget;
                break;
            }
        }
    }

    const double shift = level + offset;
    out.q = relative.array() + shift;

    // Q <= T(Q), evaluated in relative form: T(R + c) - (R + c) = T(R) - R - (1-gamma) c.
    const QTable image_gap = (apply_operator(relative) - relative).array() - (1.0 - gamma) * shift;
    out.sub_solution = image_gap.minCoeff() >= -1e-9 * (1.0 + relative.maxCoeff() + (1.0 - gamma) * std::abs(shift));
    return out;
}

} // namespace focuslab
