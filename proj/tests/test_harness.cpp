#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "focuslab/error.hpp"
#include "focuslab/harness.hpp"

using namespace focuslab;

namespace {

InstanceBundle single_state_bundle() {
    RawMdp raw;
    raw.n_states = 1;
    raw.n_actions = 1;
    raw.transition = {Eigen::MatrixXd::Ones(1, 1)};
    raw.reward = Eigen::MatrixXd::Constant(1, 1, 0.3);
    raw.initial_dist = Eigen::VectorXd::Ones(1);
    return {validate(raw), 0.3, 0.0, std::nullopt, std::nullopt, "single"};
}

RunConfig config(long T, std::uint64_t seed, HPolicy h, GammaPolicy g) {
    RunConfig c;
    c.horizon_T = T;
    c.seed = seed;
    c.agent.h_policy = h;
    c.agent.gamma_policy = g;
    return c;
}

RunRecord synthetic(std::uint64_t seed, double avg, double disc, long episodes = 3) {
    RunRecord r;
    r.seed = seed;
    r.horizon_T = 100;
    r.final_avg_regret = avg;
    r.final_gamma_regret = disc;
    r.identity_term = avg - disc;
    r.episodes = episodes;
    r.cumulative_variance = 2.0 * static_cast<double>(seed);
    return r;
}

} // namespace

TEST_CASE("gamma and H policies") {
    CHECK(resolve_gamma(GammaPolicy::avg_mode(), 1000) == doctest::Approx(0.999));
    CHECK(resolve_gamma(GammaPolicy::explicit_value(0.9), 1000) == 0.9);
    CHECK_THROWS_AS((void)resolve_gamma(GammaPolicy::avg_mode(), 1), Error);

    CHECK(resolve_H(HPolicy::explicit_value(3.0), 5, 3, 1000, 0.9, std::nullopt) == 3.0);
    CHECK(resolve_H(HPolicy::prior(), 5, 3, 1000, 0.9, 2.5) == 5.0);
    CHECK(resolve_H(HPolicy::prior(), 5, 3, 1000, 0.9, 0.0) == 1.0);
    CHECK_THROWS_AS((void)resolve_H(HPolicy::prior(), 5, 3, 1000, 0.9, std::nullopt), Error);
    CHECK(resolve_H(HPolicy::priorless_avg(), 2, 2, 1600, 0.9, std::nullopt) == doctest::Approx(10.0));
    CHECK(resolve_H(HPolicy::priorless_avg(), 8, 2, 100, 0.9, std::nullopt) == 1.0);
    CHECK(resolve_H(HPolicy::discounted_naive(), 2, 2, 100, 0.95, std::nullopt) == doctest::Approx(20.0));
    CHECK_THROWS_AS((void)resolve_H(HPolicy::explicit_value(0.5), 2, 2, 100, 0.9, std::nullopt), Error);
}

TEST_CASE("single-state runs have zero regret and variance") {
    const InstanceBundle b = single_state_bundle();
    for (long T : {2L, 17L, 300L}) {
        const RunConfig c = config(T, 1, HPolicy::explicit_value(1.0), GammaPolicy::avg_mode());
        const Oracles o = compute_oracles(b.mdp, resolve_gamma(c.agent.gamma_policy, T));
        const RunRecord r = run(b, c, o);
        CHECK(std::abs(r.final_avg_regret) <= 1e-9 * T);
        CHECK(std::abs(r.final_gamma_regret) <= 1e-9 * T);
        CHECK(r.cumulative_variance == 0.0);
    }
}

TEST_CASE("runs are deterministic and checkpoints follow the grid") {
    const InstanceBundle b = random_communicating(4, 2, 3, 5);
    const RunConfig c = config(1000, 7, HPolicy::prior(), GammaPolicy::avg_mode());
    const Oracles o = compute_oracles(b.mdp, resolve_gamma(c.agent.gamma_policy, 1000));
    const RunRecord r1 = run(b, c, o);
    const RunRecord r2 = run(b, c, o);
    CHECK(same_outcome(r1, r2));
    RunConfig other = c;
    other.seed = 8;
    CHECK_FALSE(same_outcome(r1, run(b, other, o)));

    std::vector<long> ts;
    for (const auto& cp : r1.checkpoints) ts.push_back(cp.t);
    CHECK(ts == std::vector<long>{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000});
    for (std::size_t i = 1; i < r1.checkpoints.size(); ++i) {
        CHECK(r1.checkpoints[i].var_star >= r1.checkpoints[i - 1].var_star);
    }
    CHECK(r1.checkpoints.back().avg_regret == r1.final_avg_regret);
    CHECK(r1.cumulative_variance >= 0.0);
    CHECK(std::abs(r1.final_avg_regret - r1.final_gamma_regret - r1.identity_term) <= 1e-9 * 1000);
    CHECK(r1.episodes <= episode_bound(4, 2, 1000));
}

TEST_CASE("deterministic instances accumulate no variance") {
    const double rewards[] = {1.0, 0.0, 0.0, 0.5};
    const InstanceBundle b = deterministic_cycle(rewards);
    const RunConfig c = config(2048, 3, HPolicy::priorless_avg(), GammaPolicy::avg_mode());
    const Oracles o = compute_oracles(b.mdp, resolve_gamma(c.agent.gamma_policy, 2048));
    const RunRecord r = run(b, c, o);
    CHECK(r.cumulative_variance == 0.0);
    CHECK(check_var_bound(r, o.discounted.span_v, 0.0));
}

TEST_CASE("oracle gamma must match the run") {
    const InstanceBundle b = single_state_bundle();
    const Oracles o = compute_oracles(b.mdp, 0.9);
    try {
        (void)run(b, config(100, 1, HPolicy::explicit_value(1.0), GammaPolicy::avg_mode()), o);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OracleMismatch);
    }
}

TEST_CASE("reduction check") {
    const InstanceBundle b = two_state_pair(5.0).first;
    const RunConfig c = config(3000, 2, HPolicy::explicit_value(10.0), GammaPolicy::explicit_value(0.99));
    const Oracles o = compute_oracles(b.mdp, 0.99);
    RunRecord r = run(b, c, o);
    const ReductionCheck ok = check_reduction(r, o);
    CHECK(ok.consistent);
    CHECK(ok.pass);
    CHECK(ok.lhs <= ok.rhs + ok.slack);

    // Breaking the identity is caught before the inequality.
    r.final_avg_regret -= 1.0;
    const ReductionCheck bad = check_reduction(r, o);
    CHECK_FALSE(bad.consistent);
    CHECK_FALSE(bad.pass);
}

TEST_CASE("variance bound") {
    const InstanceBundle b = two_state_pair(5.0).first;
    const Oracles o = compute_oracles(b.mdp, 0.99);
    const RunRecord r = run(b, config(2000, 4, HPolicy::explicit_value(10.0), GammaPolicy::explicit_value(0.99)), o);
    REQUIRE(r.cumulative_variance > 0.0);
    CHECK_FALSE(check_var_bound(r, o.discounted.span_v, 0.0));
    const double c = smallest_var_constant(r, o.discounted.span_v);
    CHECK(check_var_bound(r, o.discounted.span_v, c * (1.0 + 1e-12)));
    CHECK_FALSE(check_var_bound(r, o.discounted.span_v, c * 0.99));
}

TEST_CASE("optimism audit") {
    const InstanceBundle b = two_state_pair(5.0).first;
    const Oracles o = compute_oracles(b.mdp, 0.99);
    RunConfig c = config(2000, 1, HPolicy::explicit_value(10.0), GammaPolicy::explicit_value(0.99));
    const RunRecord plain = run(b, c, o);
    try {
        (void)optimism_audit(plain, o.discounted.q_star);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SnapshotsMissing);
    }
    c.record_snapshots = true;
    const RunRecord logged = run(b, c, o);
    CHECK(optimism_audit(logged, o.discounted.q_star) == 0);
    // The first episode starts from 1/(1-gamma), above Q*.
    CHECK((*logged.snapshots.front().q_hat - o.discounted.q_star).minCoeff() >= 0.0);
}

TEST_CASE("aggregate") {
    const CellSummary one = aggregate({synthetic(1, 10.0, 8.0)});
    CHECK(one.n_seeds == 1);
    CHECK(one.avg_regret.mean == 10.0);
    CHECK(one.avg_regret.std == 0.0);

    const CellSummary two = aggregate({synthetic(1, 10.0, 8.0), synthetic(2, 20.0, 12.0)});
    CHECK(two.avg_regret.mean == 15.0);
    CHECK(two.gamma_regret.mean == 10.0);
    CHECK(two.avg_regret.min == 10.0);
    CHECK(two.avg_regret.max == 20.0);
    CHECK(two.avg_regret.median == 15.0);

    std::vector<RunRecord> recs;
    for (std::uint64_t s = 1; s <= 7; ++s) recs.push_back(synthetic(s, 0.1 * s * s + 1.0 / 3.0, 0.7 / s, s));
    const CellSummary forward = aggregate(recs);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(recs.begin(), recs.end(), rng);
        const CellSummary shuffled = aggregate(recs);
        CHECK(shuffled.avg_regret.mean == forward.avg_regret.mean);
        CHECK(shuffled.avg_regret.std == forward.avg_regret.std);
        CHECK(shuffled.gamma_regret.q25 == forward.gamma_regret.q25);
        CHECK(shuffled.var_star_mean == forward.var_star_mean);
        CHECK(shuffled.episodes_mean == forward.episodes_mean);
    }
    try {
        (void)aggregate({});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyCell);
    }
}

TEST_CASE("log-log slope") {
    std::vector<double> Ts = {100, 1000, 10000, 100000};
    std::vector<double> sq;
    std::vector<double> lin;
    for (double t : Ts) {
        sq.push_back(std::sqrt(t));
        lin.push_back(3.0 * t);
    }
    const LineFit a = fit_loglog_slope(Ts, sq);
    CHECK(a.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(a.intercept) <= 1e-12);
    CHECK(fit_loglog_slope(Ts, lin).slope == doctest::Approx(1.0).epsilon(1e-12));

    // Regret = ln T on {e, e^2, e^3}: points (1, 0), (2, ln 2), (3, ln 3), so
    // the slope is (ln 3 - 0) / 2 by the closed form for three equally spaced x.
    const double e = std::exp(1.0);
    const LineFit f = fit_loglog_slope({e, e * e, e * e * e}, {1.0, 2.0, 3.0});
    CHECK(f.slope == doctest::Approx(std::log(3.0) / 2.0).epsilon(1e-12));
    CHECK(f.slope == doctest::Approx(0.549).epsilon(1e-3));

    try {
        (void)fit_loglog_slope({1, 2, 3}, {1.0, -1.0, 2.0});
        FAIL("expected an error");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::NonpositiveRegret);
    }
    CHECK_THROWS_AS((void)fit_loglog_slope({1, 2}, {1.0, 2.0}), Error);
}

TEST_CASE("episode bound") {
    CHECK(episode_bound(2, 2, 1) == 5);
    CHECK(episode_bound(2, 2, 7) == 13);
    CHECK(episode_bound(2, 2, 8) == 17);
    CHECK(episode_bound(10, 4, 100000) == 681);
}

TEST_CASE("parallel runs match serial runs") {
    const InstanceBundle b = random_communicating(5, 3, 3, 2);
    const double gamma = resolve_gamma(GammaPolicy::avg_mode(), 2000);
    const Oracles o = compute_oracles(b.mdp, gamma);
    std::vector<RunJob> jobs;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        jobs.push_back({&b, &o, config(2000, seed, HPolicy::prior(), GammaPolicy::avg_mode()), ""});
    }
    const auto serial = run_many(jobs, 1);
    const auto parallel = run_many(jobs, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(same_outcome(serial[i], parallel[i]));
    const CellSummary a = aggregate(serial);
    const CellSummary p = aggregate(parallel);
    CHECK(a.avg_regret.mean == p.avg_regret.mean);
    CHECK(a.avg_regret.std == p.avg_regret.std);

    jobs[3].config.horizon_T = 999; // gamma no longer matches the oracle
    jobs[3].context = "job 3";
    try {
        (void)run_many(jobs, 2);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OracleMismatch);
        CHECK(std::string(e.what()).find("job 3") != std::string::npos);
    }
}
