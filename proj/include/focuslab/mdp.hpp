#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "focuslab/operators.hpp"

namespace focuslab {

/// Known-model tabular MDP. transition[a] is an S x S row-stochastic matrix
/// whose row s is P(. | s, a); reward is S x A with entries in [0, 1].
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Eigen::MatrixXd> transition;
    Eigen::MatrixXd reward;
    Eigen::VectorXd initial_dist;

    auto row(int s, int a) const { return transition[static_cast<std::size_t>(a)].row(s); }
};

/// Unchecked model data as read from a file or assembled by a generator.
struct RawMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Eigen::MatrixXd> transition;
    Eigen::MatrixXd reward;
    Eigen::VectorXd initial_dist;
};

inline constexpr double kProbabilityTolerance = 1e-12;

/// Enforces the stochasticity and reward-range constraints. Rows are never
/// renormalized; anything outside tolerance is rejected.
TabularMdp validate(RawMdp raw);

struct SolvedDiscounted {
    double gamma = 0.0;
    ValueVector v_star;
    QTable q_star;
    double span_v = 0.0;
    double tolerance = 0.0;
    long iterations = 0;
};

struct GainBias {
    double rho_star = 0.0;
    ValueVector h_shifted;
    double span_h = 0.0;
    double gamma_proxy = 0.0;
    double error_bound = 0.0;
};

struct MdpMetadata {
    int gamma_support = 0;
    bool is_deterministic = false;
    double max_step_variance = 0.0;
};

/// One exact Bellman backup on the true model: r + gamma * P V.
QTable bellman_q(const TabularMdp& mdp, const ValueVector& v, double gamma);

/// Value iteration on the true model, certified to sup-norm accuracy `tol`.
SolvedDiscounted solve_discounted(const TabularMdp& mdp, double gamma, double tol,
                                  long max_iterations = 200'000'000);

/// Gain and bias span through the discounted proxy: 1/(1 - gamma0) is doubled
/// until (1 - gamma0) * span(V*_gamma0) <= tol.
GainBias solve_gain_bias(const TabularMdp& mdp, double tol);

MdpMetadata metadata(const TabularMdp& mdp, const SolvedDiscounted& solved);

// MDP file format (JSON):
//   {
//     "format": "focuslab-mdp", "version": 1,
//     "n_states": S, "n_actions": A,
//     "rewards": [[r(0,0), ..., r(0,A-1)], ...],              S rows of A
//     "transitions": [[P(0|0,0), ..., P(S-1|0,0)], ...],      S*A rows of S,
//                                                              row index s*A + a
//     "initial_dist": [mu(0), ..., mu(S-1)]
//   }
// Numbers are written with 17 significant digits so a round trip is exact.
void write_mdp(std::ostream& out, const TabularMdp& mdp);
void write_mdp_file(const std::filesystem::path& path, const TabularMdp& mdp);
TabularMdp read_mdp(std::istream& in);
TabularMdp read_mdp_file(const std::filesystem::path& path);

} // namespace focuslab
