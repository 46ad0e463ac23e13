#include "focuslab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "focuslab/error.hpp"
#include "focuslab/random.hpp"

namespace focuslab {

std::string to_string(const HPolicy& policy) {
    switch (policy.kind) {
    case HPolicy::Kind::Explicit: {
        std::ostringstream os;
        os << policy.value;
        return os.str();
    }
    case HPolicy::Kind::Prior: return "prior";
    case HPolicy::Kind::PriorlessAvg: return "priorless_avg";
    case HPolicy::Kind::DiscountedNaive: return "discounted_naive";
    }
    return "unknown";
}

std::string to_string(const GammaPolicy& policy) {
    if (policy.kind == GammaPolicy::Kind::AvgMode) return "avg_mode";
    std::ostringstream os;
    os << policy.value;
    return os.str();
}

double resolve_gamma(const GammaPolicy& policy, long T) {
    const double gamma =
        policy.kind == GammaPolicy::Kind::AvgMode ? 1.0 - 1.0 / static_cast<double>(T) : policy.value;
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "resolved gamma must lie in (0,1); T = 1 has no avg-mode gamma");
    }
    return gamma;
}

double resolve_H(const HPolicy& policy, int S, int A, long T, double gamma, std::optional<double> span_h) {
    double H = 0.0;
    switch (policy.kind) {
    case HPolicy::Kind::Explicit: H = policy.value; break;
    case HPolicy::Kind::Prior:
        if (!span_h) throw Error(ErrorCode::InvalidArgument, "prior H policy needs the bias span");
        H = 2.0 * *span_h;
        break;
    case HPolicy::Kind::PriorlessAvg:
        H = std::sqrt(static_cast<double>(T) / (std::pow(static_cast<double>(S), 3) * A));
        break;
    case HPolicy::Kind::DiscountedNaive: H = 1.0 / (1.0 - gamma); break;
    }
    // Both derived policies can fall below 1 (e.g. a zero bias span).
    if (policy.kind != HPolicy::Kind::Explicit) H = std::max(H, 1.0);
    if (!(H >= 1.0) || !std::isfinite(H)) throw Error(ErrorCode::InvalidArgument, "resolved H must be >= 1");
    return H;
}

double discounted_oracle_tol(double gamma) {
    return 1e-9 / (1.0 - gamma);
}

Oracles compute_oracles(const TabularMdp& mdp, double gamma, std::optional<GainBias> gain_bias) {
    Oracles out;
    out.discounted = solve_discounted(mdp, gamma, discounted_oracle_tol(gamma));
    out.gain_bias = gain_bias ? std::move(*gain_bias) : solve_gain_bias(mdp, kGainOracleTol);
    return out;
}

long episode_bound(int S, int A, long T) {
    long log2T = 0;
    while ((2L << log2T) <= T) ++log2T;
    return static_cast<long>(S) * A * (log2T + 1) + 1;
}

namespace {

bool is_checkpoint(long t, long T) {
    return t == T || (t & (t - 1)) == 0;
}

// Cumulative rows for inverse-CDF sampling. The last positive entry takes
// any u that rounding leaves above the final partial sum.
struct Sampler {
    std::vector<Eigen::MatrixXd> cdf;
    std::vector<Eigen::MatrixXi> last_positive;

    explicit Sampler(const TabularMdp& mdp) {
        const int S = mdp.n_states;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const auto& P = mdp.transition[static_cast<std::size_t>(a)];
            Eigen::MatrixXd c(S, S);
            Eigen::MatrixXi last(S, 1);
            for (int s = 0; s < S; ++s) {
                double acc = 0.0;
                last(s, 0) = 0;
                for (int j = 0; j < S; ++j) {
                    acc += P(s, j);
                    c(s, j) = acc;
                    if (P(s, j) > 0.0) last(s, 0) = j;
                }
            }
            cdf.push_back(std::move(c));
            last_positive.push_back(std::move(last));
        }
    }

    int next(int s, int a, double u) const {
        const auto& c = cdf[static_cast<std::size_t>(a)];
        const int last = last_positive[static_cast<std::size_t>(a)](s, 0);
        for (int j = 0; j < last; ++j) {
            if (u < c(s, j)) return j;
        }
        return last;
    }
};

int sample_initial(const Eigen::VectorXd& mu, double u) {
    double acc = 0.0;
    int last = 0;
    for (int j = 0; j < mu.size(); ++j) {
        if (mu(j) <= 0.0) continue;
        acc += mu(j);
        last = j;
        if (u < acc) return j;
    }
    return last;
}

} // namespace

RunRecord run(const InstanceBundle& bundle, const RunConfig& config, const Oracles& oracles) {
    const auto start = std::chrono::steady_clock::now();
    const TabularMdp& mdp = bundle.mdp;
    const long T = config.horizon_T;
    if (T < 1) throw Error(ErrorCode::InvalidArgument, "horizon T must be at least 1");

    const double gamma = resolve_gamma(config.agent.gamma_policy, T);
    if (oracles.discounted.gamma != gamma) {
        std::ostringstream os;
        os.precision(17);
        os << "oracle solved at gamma " << oracles.discounted.gamma << ", run resolves gamma " << gamma;
        throw Error(ErrorCode::OracleMismatch, os.str());
    }
    const double H = resolve_H(config.agent.h_policy, mdp.n_states, mdp.n_actions, T, gamma,
                               oracles.gain_bias.span_h);

    FocusConfig fc;
    fc.horizon_T = T;
    fc.gamma = gamma;
    fc.delta = config.agent.delta;
    fc.H = H;
    fc.bonus_kind = config.agent.bonus_kind;
    fc.solve_mode = config.agent.solve_mode;
    fc.clip_enabled = config.agent.clip_enabled;
    fc.exit_rule = config.agent.exit_rule;
    fc.constants = config.agent.constants;
    fc.record_q_snapshots = config.record_snapshots;
    FocusAgent agent(fc, mdp.reward);

    const ValueVector& v_star = oracles.discounted.v_star;
    const double rho = oracles.gain_bias.rho_star;
    const Eigen::VectorXd scaled_v = (1.0 - gamma) * v_star;
    const ValueVector centered = v_star.array() - v_star.minCoeff();
    Eigen::MatrixXd step_var(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) step_var(s, a) = variance(mdp.row(s, a), centered);
    }
    const Sampler sampler(mdp);
    auto rng = make_stream(config.seed, config.ordinal);

    RunRecord rec;
    rec.seed = config.seed;
    rec.horizon_T = T;
    rec.gamma = gamma;
    rec.H = H;
    rec.n_states = mdp.n_states;
    rec.n_actions = mdp.n_actions;
    rec.delta = config.agent.delta;

    double avg = 0.0;
    double disc = 0.0;
    double var = 0.0;
    double identity = 0.0;
    int s = sample_initial(mdp.initial_dist, uniform01(rng));
    for (long t = 1; t <= T; ++t) {
        const int a = agent.act(s);
        const double r = mdp.reward(s, a);
        avg += rho - r;
        disc += scaled_v(s) - r;
        identity += rho - scaled_v(s);
        var += step_var(s, a);
        const int next = sampler.next(s, a, uniform01(rng));
        agent.observe(s, a, next, t);
        s = next;
        if (is_checkpoint(t, T)) rec.checkpoints.push_back({t, avg, disc, var});
    }

    rec.final_avg_regret = avg;
    rec.final_gamma_regret = disc;
    rec.cumulative_variance = var;
    rec.identity_term = identity;
    rec.episodes = agent.episode();
    rec.snapshots = agent.snapshots();
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

bool same_outcome(const RunRecord& a, const RunRecord& b) {
    auto same_cp = [](const Checkpoint& x, const Checkpoint& y) {
        return x.t == y.t && x.avg_regret == y.avg_regret && x.gamma_regret == y.gamma_regret &&
               x.var_star == y.var_star;
    };
    auto same_snap = [](const EpisodeSnapshot& x, const EpisodeSnapshot& y) {
        if (x.k != y.k || x.t != y.t || x.epsilon != y.epsilon || x.q_sup != y.q_sup || x.v_span != y.v_span ||
            x.iterations != y.iterations || x.budget != y.budget || x.early_exit != y.early_exit ||
            x.q_hat.has_value() != y.q_hat.has_value()) {
            return false;
        }
        return !x.q_hat || *x.q_hat == *y.q_hat;
    };
    return a.seed == b.seed && a.horizon_T == b.horizon_T && a.gamma == b.gamma && a.H == b.H &&
           a.final_avg_regret == b.final_avg_regret && a.final_gamma_regret == b.final_gamma_regret &&
           a.cumulative_variance == b.cumulative_variance && a.identity_term == b.identity_term &&
           a.episodes == b.episodes &&
           std::equal(a.checkpoints.begin(), a.checkpoints.end(), b.checkpoints.begin(), b.checkpoints.end(),
                      same_cp) &&
           std::equal(a.snapshots.begin(), a.snapshots.end(), b.snapshots.begin(), b.snapshots.end(), same_snap);
}

ReductionCheck check_reduction(const RunRecord& record, const Oracles& oracles) {
    ReductionCheck out;
    const double T = static_cast<double>(record.horizon_T);
    const double gap = record.final_avg_regret - record.final_gamma_regret - record.identity_term;
    out.consistent = std::abs(gap) <= 1e-9 * T;
    out.lhs = record.final_avg_regret;
    out.rhs = (1.0 - record.gamma) * oracles.discounted.span_v * T + record.final_gamma_regret;
    out.slack = (oracles.discounted.tolerance + oracles.gain_bias.error_bound) * T;
    out.pass = out.consistent && out.lhs <= out.rhs + out.slack;
    return out;
}

namespace {

double var_scale(const RunRecord& record, double span_v) {
    const double T = static_cast<double>(record.horizon_T);
    return span_v * T + span_v * span_v * std::log(T / record.delta);
}

} // namespace

bool check_var_bound(const RunRecord& record, double span_v, double c) {
    return record.cumulative_variance <= c * var_scale(record, span_v);
}

double smallest_var_constant(const RunRecord& record, double span_v) {
    if (record.cumulative_variance <= 0.0) return 0.0;
    const double scale = var_scale(record, span_v);
    if (scale <= 0.0) return std::numeric_limits<double>::infinity();
    return record.cumulative_variance / scale;
}

long optimism_audit(const RunRecord& record, const QTable& q_star) {
    if (record.snapshots.empty()) throw Error(ErrorCode::SnapshotsMissing, "run has no episode snapshots");
    long violations = 0;
    for (const auto& snap : record.snapshots) {
        if (!snap.q_hat) throw Error(ErrorCode::SnapshotsMissing, "run was not recorded with Q-hat snapshots");
        if (snap.q_hat->rows() != q_star.rows() || snap.q_hat->cols() != q_star.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "Q* shape does not match the snapshots");
        }
        const double worst = (*snap.q_hat - q_star).minCoeff() + snap.epsilon;
        if (worst < -1e-9) ++violations;
    }
    return violations;
}

namespace {

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Stats describe(const std::vector<double>& values) {
    Stats st;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    st.mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    st.std = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    st.min = sorted.front();
    st.max = sorted.back();
    st.q25 = quantile(sorted, 0.25);
    st.median = quantile(sorted, 0.5);
    st.q75 = quantile(sorted, 0.75);
    return st;
}

} // namespace

CellSummary aggregate(std::vector<RunRecord> records) {
    if (records.empty()) throw Error(ErrorCode::EmptyCell, "no records to aggregate");
    std::stable_sort(records.begin(), records.end(),
                     [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
    std::vector<double> avg;
    std::vector<double> disc;
    double var = 0.0;
    double episodes = 0.0;
    for (const auto& r : records) {
        avg.push_back(r.final_avg_regret);
        disc.push_back(r.final_gamma_regret);
        var += r.cumulative_variance;
        episodes += static_cast<double>(r.episodes);
    }
    CellSummary out;
    out.n_seeds = static_cast<long>(records.size());
    out.avg_regret = describe(avg);
    out.gamma_regret = describe(disc);
    out.var_star_mean = var / static_cast<double>(records.size());
    out.episodes_mean = episodes / static_cast<double>(records.size());
    return out;
}

LineFit fit_loglog_slope(const std::vector<double>& T_grid, const std::vector<double>& mean_regrets) {
    if (T_grid.size() != mean_regrets.size()) throw Error(ErrorCode::LengthMismatch, "grid and regrets differ in length");
    if (T_grid.size() < 3) throw Error(ErrorCode::InvalidArgument, "need at least 3 grid points");
    const auto n = static_cast<Eigen::Index>(T_grid.size());
    Eigen::VectorXd x(n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (!(T_grid[k] > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid points must be positive");
        if (!(mean_regrets[k] > 0.0)) {
            std::ostringstream os;
            os << "mean regret " << mean_regrets[k] << " at T = " << T_grid[k] << " is not positive";
            throw Error(ErrorCode::NonpositiveRegret, os.str());
        }
        x(i) = std::log(T_grid[k]);
        y(i) = std::log(mean_regrets[k]);
    }
    const Eigen::VectorXd dx = x.array() - x.mean();
    const double slope = dx.dot(y.array().matrix() - Eigen::VectorXd::Constant(n, y.mean())) / dx.squaredNorm();
    return {slope, y.mean() - slope * x.mean()};
}

std::vector<RunRecord> run_many(const std::vector<RunJob>& jobs, int workers) {
    std::vector<RunRecord> out(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                out[i] = run(*jobs[i].bundle, jobs[i].config, *jobs[i].oracles);
            } catch (const Error& e) {
                const std::string where = jobs[i].context.empty() ? "" : jobs[i].context + ": ";
                errors[i] = std::make_exception_ptr(Error(e.code(), where + e.detail()));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int n = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
    if (n == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < n; ++w) pool.emplace_back(work);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

} // namespace focuslab
