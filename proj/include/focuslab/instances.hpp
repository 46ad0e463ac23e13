#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "focuslab/mdp.hpp"

namespace focuslab {

enum class Family { TwoStatePair, LeafSearchTree, PriorFreePair, DeterministicCycle, RandomCommunicating };

std::string to_string(Family family);
Family family_from_string(std::string_view name);

/// Declarative description of one instance. Which fields matter depends on
/// the family; states and actions are 0-based.
struct InstanceSpec {
    Family family = Family::TwoStatePair;
    double B = 0.0;
    int S = 0;
    int A = 0;
    double D = 0.0;
    int target_state = -1;
    int target_action = 0;
    int member = 1;
    std::vector<double> rewards;
    int gamma_support = 0;
    std::uint64_t seed = 0;

    std::string label() const;
};

/// Parses "family:key=value,key=value". List values use ';' as separator,
/// e.g. "deterministic_cycle:rewards=1;0;0;0".
InstanceSpec parse_instance_spec(std::string_view text);

struct InstanceBundle {
    TabularMdp mdp;
    std::optional<double> known_gain;
    std::optional<double> known_span_h;
    /// The construction only promises span(h*) <= this value.
    std::optional<double> span_h_upper_bound;
    std::optional<double> known_diameter_bound;
    std::string label;
};

/// Two 2-state, 2-action MDPs (action 0 = stay, 1 = leave). They differ only in
/// the stay action of state 1: a reward-1 self-loop in the first member, a
/// reward-1 move back to state 0 in the second.
std::pair<InstanceBundle, InstanceBundle> two_state_pair(double B);

/// A-ary search tree over states 0..S-2 in breadth-first order (root 0,
/// child c reached by action c), good state S-1. Leaves self-loop on actions
/// 0..A-2 and return to the root with action A-1; the target leaf-action
/// reaches the good state with probability 2/D.
InstanceBundle leaf_search_tree(int S, int A, double D, int target_state, int target_action);

/// Tree pair whose members differ only in action 0 of state S-1 (self-loop vs
/// return to root). Tree actions earn 1/2, the target leaf-action reaches
/// state S-1 with probability 2/B.
std::pair<InstanceBundle, InstanceBundle> prior_free_pair(int S, int A, double B, int target_state,
                                                          int target_action);

/// Deterministic cycle 0 -> 1 -> ... -> S-1 -> 0 on action 0 with the given
/// rewards, and a reward-0 self-loop on action 1.
InstanceBundle deterministic_cycle(std::span<const double> rewards);

/// Seeded stochastic instance: every row is supported on exactly
/// gamma_support states, and action 0 always keeps the successor on a random
/// Hamiltonian cycle in its support so the MDP is communicating.
InstanceBundle random_communicating(int S, int A, int gamma_support, std::uint64_t seed);

InstanceBundle build_instance(const InstanceSpec& spec);

/// Breadth-first A-ary tree over n nodes.
struct TreeLayout {
    int nodes = 0;
    int arity = 0;
    int child(int node, int c) const { return arity * node + 1 + c; }
    bool has_child(int node, int c) const { return child(node, c) < nodes; }
    bool is_leaf(int node) const { return !has_child(node, 0); }
    std::vector<int> leaves() const;
    int depth() const;
};

/// ceil(log_A S) computed in integers.
int ceil_log(int base, int value);

} // namespace focuslab
