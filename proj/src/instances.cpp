#include "focuslab/instances.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "focuslab/random.hpp"

namespace focuslab {

std::string to_string(Family family) {
    switch (family) {
    case Family::TwoStatePair: return "two_state_pair";
    case Family::LeafSearchTree: return "leaf_search_tree";
    case Family::PriorFreePair: return "prior_free_pair";
    case Family::DeterministicCycle: return "deterministic_cycle";
    case Family::RandomCommunicating: return "random_communicating";
    }
    return "unknown";
}

Family family_from_string(std::string_view name) {
    for (Family f : {Family::TwoStatePair, Family::LeafSearchTree, Family::PriorFreePair,
                     Family::DeterministicCycle, Family::RandomCommunicating}) {
        if (to_string(f) == name) return f;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown instance family '" + std::string(name) + "'");
}

namespace {

std::string number(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

RawMdp blank(int S, int A) {
    RawMdp raw;
    raw.n_states = S;
    raw.n_actions = A;
    raw.transition.assign(static_cast<std::size_t>(A), Eigen::MatrixXd::Zero(S, S));
    raw.reward = Eigen::MatrixXd::Zero(S, A);
    raw.initial_dist = Eigen::VectorXd::Zero(S);
    raw.initial_dist(0) = 1.0;
    return raw;
}

void move_to(RawMdp& raw, int s, int a, int next, double reward) {
    raw.transition[static_cast<std::size_t>(a)](s, next) = 1.0;
    raw.reward(s, a) = reward;
}

int resolve_target(const TreeLayout& tree, int target_state, ErrorCode not_leaf) {
    const auto leaves = tree.leaves();
    if (target_state < 0) return leaves.back();
    if (target_state >= tree.nodes || !tree.is_leaf(target_state)) {
        throw Error(not_leaf, "target state " + std::to_string(target_state) + " is not a leaf of the tree");
    }
    return target_state;
}

} // namespace

int ceil_log(int base, int value) {
    int k = 0;
    long long power = 1;
    while (power < value) {
        power *= base;
        ++k;
    }
    return k;
}

std::vector<int> TreeLayout::leaves() const {
    std::vector<int> out;
    for (int n = 0; n < nodes; ++n) {
        if (is_leaf(n)) out.push_back(n);
    }
    return out;
}

int TreeLayout::depth() const {
    int d = 0;
    for (int n = nodes - 1; n > 0; n = (n - 1) / arity) ++d;
    return d;
}

std::string InstanceSpec::label() const {
    std::ostringstream os;
    os << to_string(family) << '(';
    switch (family) {
    case Family::TwoStatePair: os << "B=" << number(B) << ",member=" << member; break;
    case Family::LeafSearchTree:
        os << "S=" << S << ",A=" << A << ",D=" << number(D) << ",target=" << target_state << '/' << target_action;
        break;
    case Family::PriorFreePair:
        os << "S=" << S << ",A=" << A << ",B=" << number(B) << ",target=" << target_state << '/' << target_action
           << ",member=" << member;
        break;
    case Family::DeterministicCycle:
        os << "rewards=";
        for (std::size_t i = 0; i < rewards.size(); ++i) os << (i ? ";" : "") << number(rewards[i]);
        break;
    case Family::RandomCommunicating:
        os << "S=" << S << ",A=" << A << ",support=" << gamma_support << ",seed=" << seed;
        break;
    }
    os << ')';
    return os.str();
}

InstanceSpec parse_instance_spec(std::string_view text) {
    const auto colon = text.find(':');
    InstanceSpec spec;
    spec.family = family_from_string(text.substr(0, colon));
    if (colon == std::string_view::npos) return spec;

    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "expected key=value in '" + std::string(item) + "'");
        }
        const std::string key(item.substr(0, eq));
        const std::string value(item.substr(eq + 1));
        auto as_double = [&](const std::string& v) {
            try {
                std::size_t used = 0;
                const double x = std::stod(v, &used);
                if (used != v.size()) throw std::invalid_argument(v);
                return x;
            } catch (const std::exception&) {
                throw Error(ErrorCode::ParseError, "bad number '" + v + "' for " + key);
            }
        };
        auto as_int = [&](const std::string& v) {
            long long x = 0;
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc() || ptr != v.data() + v.size()) {
                throw Error(ErrorCode::ParseError, "bad integer '" + v + "' for " + key);
            }
            return x;
        };
        if (key == "B") spec.B = as_double(value);
        else if (key == "S") spec.S = static_cast<int>(as_int(value));
        else if (key == "A") spec.A = static_cast<int>(as_int(value));
        else if (key == "D") spec.D = as_double(value);
        else if (key == "target_state") spec.target_state = static_cast<int>(as_int(value));
        else if (key == "target_action") spec.target_action = static_cast<int>(as_int(value));
        else if (key == "member") spec.member = static_cast<int>(as_int(value));
        else if (key == "gamma_support") spec.gamma_support = static_cast<int>(as_int(value));
        else if (key == "seed") spec.seed = static_cast<std::uint64_t>(as_int(value));
        else if (key == "rewards") {
            spec.rewards.clear();
            std::string_view list = value;
            while (!list.empty()) {
                const auto semi = list.find(';');
                spec.rewards.push_back(as_double(std::string(list.substr(0, semi))));
                list = semi == std::string_view::npos ? std::string_view{} : list.substr(semi + 1);
            }
        } else {
            throw Error(ErrorCode::ParseError, "unknown instance parameter '" + key + "'");
        }
    }
    return spec;
}

// ---------------------------------------------------------------------------

std::pair<InstanceBundle, InstanceBundle> two_state_pair(double B) {
    if (!(B > 2.0) || !std::isfinite(B)) throw Error(ErrorCode::BOutOfRange, "B must exceed 2");
    constexpr int kStay = 0;
    constexpr int kLeave = 1;

    RawMdp raw = blank(2, 2);
    move_to(raw, 0, kStay, 0, 0.5);
    raw.transition[kLeave](0, 0) = 1.0 - 1.0 / B;
    raw.transition[kLeave](0, 1) = 1.0 / B;
    raw.reward(0, kLeave) = 0.0;
    move_to(raw, 1, kLeave, 0, 0.0);

    RawMdp absorbing = raw;
    move_to(absorbing, 1, kStay, 1, 1.0);
    RawMdp returning = raw;
    move_to(returning, 1, kStay, 0, 1.0);

    InstanceBundle first{validate(std::move(absorbing)), 1.0, B, std::nullopt, std::nullopt,
                         "two_state_pair(B=" + number(B) + ",member=1)"};
    InstanceBundle second{validate(std::move(returning)), 0.5, 0.5, std::nullopt, std::nullopt,
                          "two_state_pair(B=" + number(B) + ",member=2)"};
    return {std::move(first), std::move(second)};
}

InstanceBundle leaf_search_tree(int S, int A, double D, int target_state, int target_action) {
    if (S < 2 || A < 2) throw Error(ErrorCode::BadTreeParams, "need S >= 2 and A >= 2");
    if (!(D >= 4.0 * ceil_log(A, S)) || !(D > 2.0) || !std::isfinite(D)) {
        throw Error(ErrorCode::BadTreeParams, "need D >= 4 ceil(log_A S) and D > 2");
    }
    const TreeLayout tree{S - 1, A};
    const int target = resolve_target(tree, target_state, ErrorCode::TargetNotLeaf);
    if (target_action < 0 || target_action > A - 2) {
        throw Error(ErrorCode::BadTreeParams, "target action must be one of the leaf self-loop actions 0..A-2");
    }
    const int good = S - 1;
    const int root = 0;

    RawMdp raw = blank(S, A);
    for (int n = 0; n < tree.nodes; ++n) {
        if (tree.is_leaf(n)) {
            for (int a = 0; a < A - 1; ++a) move_to(raw, n, a, n, 0.0);
            move_to(raw, n, A - 1, root, 0.0);
        } else {
            for (int c = 0; c < A; ++c) move_to(raw, n, c, tree.has_child(n, c) ? tree.child(n, c) : n, 0.0);
        }
    }
    auto& row = raw.transition[static_cast<std::size_t>(target_action)];
    row.row(target).setZero();
    row(target, target) = 1.0 - 2.0 / D;
    row(target, good) = 2.0 / D;

    for (int a = 0; a < A - 1; ++a) move_to(raw, good, a, good, 1.0);
    move_to(raw, good, A - 1, root, 0.0);

    std::ostringstream label;
    label << "leaf_search_tree(S=" << S << ",A=" << A << ",D=" << number(D) << ",target=" << target << '/'
          << target_action << ')';
    return InstanceBundle{validate(std::move(raw)), 1.0, std::nullopt, std::nullopt, D, label.str()};
}

std::pair<InstanceBundle, InstanceBundle> prior_free_pair(int S, int A, double B, int target_state,
                                                          int target_action) {
    if (S < 2 || A < 2) throw Error(ErrorCode::BadTreeParams, "need S >= 2 and A >= 2");
    if (!(B >= std::max(50.0, 2.0 * ceil_log(A, S))) || !std::isfinite(B)) {
        throw Error(ErrorCode::BadTreeParams, "need B >= max(50, 2 ceil(log_A S))");
    }
    const TreeLayout tree{S - 1, A};
    const int target = resolve_target(tree, target_state, ErrorCode::BadTreeParams);
    if (target_action < 0 || target_action > A - 2) {
        throw Error(ErrorCode::BadTreeParams, "target action must be one of the leaf self-loop actions 0..A-2");
    }
    const int outside = S - 1;
    const int root = 0;

    RawMdp raw = blank(S, A);
    for (int n = 0; n < tree.nodes; ++n) {
        if (tree.is_leaf(n)) {
            for (int a = 0; a < A - 1; ++a) move_to(raw, n, a, n, 0.0);
            move_to(raw, n, A - 1, root, 0.5);
        } else {
            for (int c = 0; c < A; ++c) move_to(raw, n, c, tree.has_child(n, c) ? tree.child(n, c) : n, 0.5);
        }
    }
    auto& row = raw.transition[static_cast<std::size_t>(target_action)];
    row.row(target).setZero();
    row(target, target) = 1.0 - 2.0 / B;
    row(target, outside) = 2.0 / B;
    for (int a = 1; a < A; ++a) move_to(raw, outside, a, root, 0.0);

    RawMdp absorbing = raw;
    move_to(absorbing, outside, 0, outside, 1.0);
    RawMdp returning = raw;
    move_to(returning, outside, 0, root, 1.0);

    std::ostringstream base;
    base << "prior_free_pair(S=" << S << ",A=" << A << ",B=" << number(B) << ",target=" << target << '/'
         << target_action << ",member=";
    InstanceBundle first{validate(std::move(absorbing)), 1.0, std::nullopt, B, std::nullopt, base.str() + "1)"};
    InstanceBundle second{validate(std::move(returning)), 0.5, 0.5, std::nullopt, std::nullopt, base.str() + "2)"};
    return {std::move(first), std::move(second)};
}

InstanceBundle deterministic_cycle(std::span<const double> rewards) {
    const int S = static_cast<int>(rewards.size());
    if (S < 1) throw Error(ErrorCode::InvalidArgument, "cycle needs at least one state");
    RawMdp raw = blank(S, 2);
    for (int s = 0; s < S; ++s) {
        move_to(raw, s, 0, (s + 1) % S, rewards[static_cast<std::size_t>(s)]);
        move_to(raw, s, 1, s, 0.0);
    }
    TabularMdp mdp = validate(std::move(raw));

    // Going around the cycle is gain optimal (the self-loop earns nothing);
    // its bias satisfies h(s) - h(s+1) = r(s) - gain.
    const double gain = std::accumulate(rewards.begin(), rewards.end(), 0.0) / S;
    double h = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    for (int s = 0; s + 1 < S; ++s) {
        h -= rewards[static_cast<std::size_t>(s)] - gain;
        lo = std::min(lo, h);
        hi = std::max(hi, h);
    }

    std::ostringstream label;
    label << "deterministic_cycle(rewards=";
    for (int s = 0; s < S; ++s) label << (s ? ";" : "") << number(rewards[static_cast<std::size_t>(s)]);
    label << ')';
    return InstanceBundle{std::move(mdp), gain, hi - lo, std::nullopt, std::nullopt, label.str()};
}

InstanceBundle random_communicating(int S, int A, int gamma_support, std::uint64_t seed) {
    if (S < 2 || A < 1) throw Error(ErrorCode::InvalidArgument, "need S >= 2 and A >= 1");
    if (gamma_support < 2 || gamma_support > S) {
        throw Error(ErrorCode::InvalidArgument, "support size must lie in [2, S]");
    }
    auto rng = make_stream(seed, 0x1257a11ceULL);

    std::vector<int> order(static_cast<std::size_t>(S));
    std::iota(order.begin(), order.end(), 0);
    for (int i = S - 1; i > 0; --i) {
        const auto j = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<int> successor(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) {
        successor[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
            order[static_cast<std::size_t>((i + 1) % S)];
    }

    RawMdp raw = blank(S, A);
    std::vector<int> pool(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            // Partial Fisher-Yates: the first gamma_support entries of pool
            // become the support. Action 0 pins the cycle successor first.
            std::iota(pool.begin(), pool.end(), 0);
            int fixed = 0;
            if (a == 0) {
                std::swap(pool[0], pool[static_cast<std::size_t>(successor[static_cast<std::size_t>(s)])]);
                fixed = 1;
            }
            for (int i = fixed; i < gamma_support; ++i) {
                const auto j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(S - i)));
                std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            }
            // Flat Dirichlet weights via normalized exponentials.
            std::vector<double> w(static_cast<std::size_t>(gamma_support));
            double total = 0.0;
            for (auto& x : w) {
                x = -std::log(uniform_open01(rng));
                total += x;
            }
            auto& P = raw.transition[static_cast<std::size_t>(a)];
            for (int i = 0; i < gamma_support; ++i) {
                P(s, pool[static_cast<std::size_t>(i)]) = w[static_cast<std::size_t>(i)] / total;
            }
            raw.reward(s, a) = uniform01(rng);
        }
    }

    std::ostringstream label;
    label << "random_communicating(S=" << S << ",A=" << A << ",support=" << gamma_support << ",seed=" << seed
          << ')';
    return InstanceBundle{validate(std::move(raw)), std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                          label.str()};
}

InstanceBundle build_instance(const InstanceSpec& spec) {
    auto pick = [&](std::pair<InstanceBundle, InstanceBundle> pair) {
        if (spec.member == 1) return std::move(pair.first);
        if (spec.member == 2) return std::move(pair.second);
        throw Error(ErrorCode::InvalidArgument, "member must be 1 or 2");
    };
    switch (spec.family) {
    case Family::TwoStatePair: return pick(two_state_pair(spec.B));
    case Family::LeafSearchTree: return leaf_search_tree(spec.S, spec.A, spec.D, spec.target_state, spec.target_action);
    case Family::PriorFreePair:
        return pick(prior_free_pair(spec.S, spec.A, spec.B, spec.target_state, spec.target_action));
    case Family::DeterministicCycle: {
        if (!spec.rewards.empty()) return deterministic_cycle(spec.rewards);
        if (spec.S < 1) throw Error(ErrorCode::InvalidArgument, "deterministic_cycle needs S or rewards");
        // Default pattern: reward 1 on state 0, 0 elsewhere.
        std::vector<double> rewards(static_cast<std::size_t>(spec.S), 0.0);
        rewards[0] = 1.0;
        return deterministic_cycle(rewards);
    }
    case Family::RandomCommunicating: return random_communicating(spec.S, spec.A, spec.gamma_support, spec.seed);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown family");
}

} // namespace focuslab
