#include <doctest.h>

#include <cmath>
#include <queue>

#include "focuslab/error.hpp"
#include "focuslab/instances.hpp"

using namespace focuslab;

namespace {

int differing_rows(const TabularMdp& x, const TabularMdp& y) {
    int n = 0;
    for (int s = 0; s < x.n_states; ++s) {
        for (int a = 0; a < x.n_actions; ++a) n += x.row(s, a) != y.row(s, a) || x.reward(s, a) != y.reward(s, a);
    }
    return n;
}

int support(const TabularMdp& mdp, int s, int a) {
    return static_cast<int>((mdp.row(s, a).array() > 0.0).count());
}

// Breadth-first closure over the support graph from `from`.
std::vector<bool> reachable(const TabularMdp& mdp, int from) {
    std::vector<bool> seen(static_cast<std::size_t>(mdp.n_states), false);
    std::queue<int> todo;
    todo.push(from);
    seen[static_cast<std::size_t>(from)] = true;
    while (!todo.empty()) {
        const int s = todo.front();
        todo.pop();
        for (int a = 0; a < mdp.n_actions; ++a) {
            for (int j = 0; j < mdp.n_states; ++j) {
                if (mdp.row(s, a)(j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = true;
                    todo.push(j);
                }
            }
        }
    }
    return seen;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST_CASE("two-state pair") {
    const auto [p1, p2] = two_state_pair(10.0);
    CHECK(p1.known_gain == 1.0);
    CHECK(p1.known_span_h == 10.0);
    CHECK(p2.known_gain == 0.5);
    CHECK(p2.known_span_h == 0.5);
    for (const auto* b : {&p1, &p2}) {
        CHECK(b->mdp.reward(0, 0) == 0.5);
        CHECK(b->mdp.reward(0, 1) == 0.0);
        CHECK(b->mdp.reward(1, 0) == 1.0);
        CHECK(b->mdp.reward(1, 1) == 0.0);
        CHECK(b->mdp.row(0, 1)(1) == doctest::Approx(0.1));
        CHECK(b->mdp.initial_dist(0) == 1.0);
    }
    CHECK(p1.mdp.row(1, 0)(1) == 1.0);
    CHECK(p2.mdp.row(1, 0)(0) == 1.0);
    CHECK(differing_rows(p1.mdp, p2.mdp) == 1);
    CHECK(code_of([] { two_state_pair(2.0); }) == ErrorCode::BOutOfRange);
}

TEST_CASE("tree layout") {
    const TreeLayout tree{13, 3};
    CHECK(tree.leaves().size() == 9);
    CHECK(tree.depth() == 2);
    CHECK(tree.child(0, 2) == 3);
    CHECK(tree.is_leaf(4));
    CHECK_FALSE(tree.is_leaf(3));
    CHECK(ceil_log(3, 14) == 3);
    CHECK(ceil_log(2, 8) == 3);
    CHECK(ceil_log(2, 9) == 4);
}

TEST_CASE("leaf search tree") {
    const InstanceBundle b = leaf_search_tree(14, 3, 12.0, 12, 1);
    const TabularMdp& m = b.mdp;
    CHECK(m.n_states == 14);
    CHECK(b.known_diameter_bound == 12.0);
    CHECK(m.row(12, 1)(12) == doctest::Approx(1.0 - 2.0 / 12.0));
    CHECK(m.row(12, 1)(13) == doctest::Approx(2.0 / 12.0));
    CHECK(support(m, 12, 1) == 2);
    for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < m.n_actions; ++a) {
            if (s == 12 && a == 1) continue;
            CHECK(support(m, s, a) == 1);
        }
    }
    // Root children in action order, return-to-root at the last action.
    CHECK(m.row(0, 0)(1) == 1.0);
    CHECK(m.row(0, 2)(3) == 1.0);
    CHECK(m.row(5, 2)(0) == 1.0);
    CHECK(m.reward(13, 0) == 1.0);
    CHECK(m.reward(5, 0) == 0.0);

    CHECK(code_of([] { leaf_search_tree(14, 3, 11.0, 12, 1); }) == ErrorCode::BadTreeParams);
    CHECK(code_of([] { leaf_search_tree(14, 3, 12.0, 2, 1); }) == ErrorCode::TargetNotLeaf);
    CHECK(code_of([] { leaf_search_tree(14, 3, 12.0, 12, 2); }) == ErrorCode::BadTreeParams);
}

TEST_CASE("prior-free pair") {
    const auto [p1, p2] = prior_free_pair(7, 2, 100.0, -1, 0);
    CHECK(differing_rows(p1.mdp, p2.mdp) == 1);
    CHECK(p1.mdp.row(6, 0)(6) == 1.0);
    CHECK(p2.mdp.row(6, 0)(0) == 1.0);
    CHECK(p1.span_h_upper_bound == 100.0);
    CHECK(p2.known_gain == 0.5);
    const int target = TreeLayout{6, 2}.leaves().back();
    CHECK(p1.mdp.row(target, 0)(target) == doctest::Approx(1.0 - 2.0 / 100.0));
    CHECK(p1.mdp.row(target, 0)(6) == doctest::Approx(2.0 / 100.0));
    CHECK(code_of([] { prior_free_pair(7, 2, 40.0, -1, 0); }) == ErrorCode::BadTreeParams);
}

TEST_CASE("deterministic cycle") {
    const double r4[] = {1.0, 0.0, 0.0, 0.0};
    const InstanceBundle b = deterministic_cycle(r4);
    CHECK(b.known_gain == doctest::Approx(0.25));
    CHECK(b.known_span_h == doctest::Approx(0.75));
    CHECK(b.mdp.n_actions == 2);
    const double r1[] = {1.0};
    const InstanceBundle one = deterministic_cycle(r1);
    CHECK(one.known_gain == 1.0);
    CHECK(one.known_span_h == 0.0);
}

TEST_CASE("random communicating instances") {
    const InstanceBundle a = random_communicating(8, 3, 3, 42);
    const InstanceBundle b = random_communicating(8, 3, 3, 42);
    CHECK(a.mdp.reward == b.mdp.reward);
    for (int k = 0; k < 3; ++k) CHECK(a.mdp.transition[k] == b.mdp.transition[k]);
    CHECK(a.mdp.reward != random_communicating(8, 3, 3, 43).mdp.reward);
    for (int s = 0; s < 8; ++s) {
        for (int k = 0; k < 3; ++k) CHECK(support(a.mdp, s, k) == 3);
        const auto seen = reachable(a.mdp, s);
        CHECK(std::count(seen.begin(), seen.end(), true) == 8);
    }
    CHECK_THROWS_AS(random_communicating(4, 2, 5, 1), Error);
}

TEST_CASE("instance spec strings") {
    const InstanceSpec s = parse_instance_spec("random_communicating:S=5,A=3,gamma_support=3,seed=7");
    CHECK(s.family == Family::RandomCommunicating);
    CHECK(s.S == 5);
    CHECK(s.seed == 7);
    const InstanceSpec c = parse_instance_spec("deterministic_cycle:rewards=1;0;0.5");
    CHECK(c.rewards == std::vector<double>{1.0, 0.0, 0.5});
    CHECK(build_instance(parse_instance_spec("two_state_pair:B=5,member=2")).known_gain == 0.5);
    CHECK(build_instance(parse_instance_spec("deterministic_cycle:S=8")).known_gain == doctest::Approx(0.125));
    CHECK_THROWS_AS(parse_instance_spec("nope:S=1"), Error);
    CHECK_THROWS_AS(parse_instance_spec("two_state_pair:B=x"), Error);
    CHECK_THROWS_AS(parse_instance_spec("two_state_pair:Q=1"), Error);
}

TEST_CASE("analytic metadata agrees with the gain oracle") {
    const double rewards[] = {0.2, 0.9, 0.4, 0.0, 1.0};
    std::vector<InstanceBundle> bundles;
    auto pair = two_state_pair(6.0);
    bundles.push_back(pair.first);
    bundles.push_back(pair.second);
    bundles.push_back(deterministic_cycle(rewards));
    bundles.push_back(prior_free_pair(7, 2, 60.0, -1, 0).second);
    for (const auto& b : bundles) {
        const GainBias g = solve_gain_bias(b.mdp, 1e-7);
        if (b.known_gain) CHECK(std::abs(g.rho_star - *b.known_gain) <= 1e-3 + g.error_bound);
        if (b.known_span_h) CHECK(std::abs(g.span_h - *b.known_span_h) <= 1e-3 + g.error_bound);
    }
}
