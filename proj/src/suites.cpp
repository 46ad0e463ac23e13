#include "focuslab/suites.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "focuslab/random.hpp"

namespace focuslab {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

QTable random_table(std::mt19937_64& rng, int S, int A, double hi) {
    QTable q(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) q(s, a) = uniform(rng, 0.0, hi);
    }
    return q;
}

FocusAgent random_agent(std::mt19937_64& rng) {
    static constexpr double kGammas[] = {0.5, 0.9, 0.99};
    const int S = 1 + static_cast<int>(uniform_index(rng, 6));
    const int A = 1 + static_cast<int>(uniform_index(rng, 4));
    const double gamma = kGammas[uniform_index(rng, 3)];

    FocusConfig config;
    config.gamma = gamma;
    config.horizon_T = 1 + static_cast<long>(uniform_index(rng, 100000));
    config.delta = uniform(rng, 0.01, 0.5);
    config.H = uniform(rng, 1.0, 1.0 / (1.0 - gamma));
    config.bonus_kind = uniform_index(rng, 4) == 0 ? BonusKind::Hoeffding : BonusKind::Bernstein;
    config.clip_enabled = uniform_index(rng, 4) != 0;

    Eigen::MatrixXd reward(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) reward(s, a) = uniform01(rng);
    }
    // About a third of the pairs stay unvisited so uniform rows are covered.
    std::vector<CountMatrix> counts(static_cast<std::size_t>(A), CountMatrix::Zero(S, S));
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) {
            if (uniform_index(rng, 3) == 0) continue;
            for (int j = 0; j < S; ++j) {
                counts[static_cast<std::size_t>(a)](s, j) = static_cast<std::int64_t>(uniform_index(rng, 20));
            }
        }
    }
    const long t = 1 + static_cast<long>(uniform_index(rng, static_cast<std::uint64_t>(config.horizon_T)));
    return FocusAgent::with_counts(config, std::move(reward), counts, t);
}

} // namespace

OperatorSuiteResult operator_property_suite(long draws, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    OperatorSuiteResult out;
    out.draws = draws;
    auto rng = make_stream(seed, 0x0b5e7a7eULL);

    for (long i = 0; i < draws; ++i) {
        const FocusAgent agent = random_agent(rng);
        const int S = agent.n_states();
        const int A = agent.n_actions();
        const double gamma = agent.config().gamma;
        const double scale = 1.0 / (1.0 - gamma);

        const QTable q = random_table(rng, S, A, scale);
        const QTable q2 = random_table(rng, S, A, scale);
        const double c = uniform(rng, -scale, scale);
        const QTable tq = agent.apply_operator(q);

        // T(Q + c) = T(Q) + gamma c
        const QTable shifted = agent.apply_operator((q.array() + c).matrix());
        const double shift_err = (shifted.array() - tq.array() - gamma * c).abs().maxCoeff();
        out.worst_shift_error = std::max(out.worst_shift_error, shift_err);
        if (shift_err > 1e-9) ++out.shift_failures;

        // ||T Q - T Q'|| <= gamma ||Q - Q'||
        const double dist = (q - q2).cwiseAbs().maxCoeff();
        if (dist > 0.0) {
            const double ratio = (tq - agent.apply_operator(q2)).cwiseAbs().maxCoeff() / dist;
            out.worst_ratio_minus_gamma = std::max(out.worst_ratio_minus_gamma, ratio - gamma);
            if (ratio > gamma + 1e-12) ++out.contraction_failures;
        }

        // Premise only on row maxima: shift each row of a fresh table down
        // until its max is at most the max of the same row of Q.
        QTable premise = random_table(rng, S, A, scale);
        const ValueVector mq = max_over_actions(q);
        for (int s = 0; s < S; ++s) {
            const double excess = premise.row(s).maxCoeff() - mq(s) + uniform(rng, 0.0, 1.0);
            premise.row(s).array() -= std::max(0.0, excess);
        }
        const double slack = 1e-12 * (1.0 + tq.cwiseAbs().maxCoeff());
        if ((agent.apply_operator(premise) - tq).maxCoeff() > slack) ++out.monotone_failures;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::vector<CheckLine> oracle_crosscheck_suite() {
    std::vector<CheckLine> lines;
    auto check = [&](const std::string& name, double got, double want, double tol) {
        std::ostringstream os;
        os.precision(10);
        os << "got " << got << ", expected " << want;
        lines.push_back({name, std::abs(got - want) <= tol, os.str()});
    };
    const auto [p1, p2] = two_state_pair(10.0);
    const GainBias g1 = solve_gain_bias(p1.mdp, kGainOracleTol);
    const GainBias g2 = solve_gain_bias(p2.mdp, kGainOracleTol);
    check("two_state_pair(B=10) member 1 gain", g1.rho_star, 1.0, 1e-3);
    check("two_state_pair(B=10) member 1 bias span", g1.span_h, 10.0, 1e-3);
    check("two_state_pair(B=10) member 2 gain", g2.rho_star, 0.5, 1e-3);
    check("two_state_pair(B=10) member 2 bias span", g2.span_h, 0.5, 1e-3);
    const auto pf = prior_free_pair(7, 2, 50.0, -1, 0);
    const GainBias g3 = solve_gain_bias(pf.second.mdp, kGainOracleTol);
    check("prior_free_pair member 2 gain", g3.rho_star, 0.5, 1e-3);
    return lines;
}

RunVerdict judge_run(const RunRecord& record, const Oracles& oracles, double var_c) {
    RunVerdict v;
    v.reduction = check_reduction(record, oracles);
    v.var_bound = check_var_bound(record, oracles.discounted.span_v, var_c);
    v.smallest_c = smallest_var_constant(record, oracles.discounted.span_v);
    v.episodes_ok = record.episodes <= episode_bound(record.n_states, record.n_actions, record.horizon_T);
    bool have_q = !record.snapshots.empty();
    for (const auto& snap : record.snapshots) {
        v.solves_monotone = v.solves_monotone && snap.iterates_monotone;
        v.norm_bound = v.norm_bound && snap.within_norm_bound;
        if (!snap.sub_solution) ++v.episodes_sub_solution_failed;
        have_q = have_q && snap.q_hat.has_value();
    }
    if (have_q) v.optimism_violations = optimism_audit(record, oracles.discounted.q_star);
    return v;
}

} // namespace focuslab
