#include "focuslab/mdp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "focuslab/fixed_point.hpp"

namespace focuslab {

namespace {

std::string where(int s, int a) {
    std::ostringstream os;
    os << "(s=" << s << ", a=" << a << ")";
    return os.str();
}

void check_probability_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, ErrorCode code,
                           const std::string& label) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        const double x = row(i);
        if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
            throw Error(code, label + " has entry outside [0,1] at index " + std::to_string(i));
        }
    }
    const double sum = row.sum();
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << label << " sums to " << sum;
        throw Error(code, os.str());
    }
}

} // namespace

TabularMdp validate(RawMdp raw) {
    const int S = raw.n_states;
    const int A = raw.n_actions;
    if (S <= 0 || A <= 0) throw Error(ErrorCode::DimensionMismatch, "need at least one state and one action");
    if (static_cast<int>(raw.transition.size()) != A) {
        throw Error(ErrorCode::DimensionMismatch, "expected one transition matrix per action");
    }
    for (const auto& P : raw.transition) {
        if (P.rows() != S || P.cols() != S) {
            throw Error(ErrorCode::DimensionMismatch, "transition matrices must be S x S");
        }
    }
    if (raw.reward.rows() != S || raw.reward.cols() != A) {
        throw Error(ErrorCode::DimensionMismatch, "reward table must be S x A");
    }
    if (raw.initial_dist.size() != S) {
        throw Error(ErrorCode::DimensionMismatch, "initial distribution must have length S");
    }

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            check_probability_row(raw.transition[static_cast<std::size_t>(a)].row(s),
                                  ErrorCode::RowNotStochastic, "transition row " + where(s, a));
            const double r = raw.reward(s, a);
            if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
                throw Error(ErrorCode::RewardOutOfRange, "reward at " + where(s, a) + " outside [0,1]");
            }
        }
    }
    check_probability_row(raw.initial_dist.transpose(), ErrorCode::BadInitialDist, "initial distribution");

    TabularMdp mdp;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.transition = std::move(raw.transition);
    mdp.reward = std::move(raw.reward);
    mdp.initial_dist = std::move(raw.initial_dist);
    return mdp;
}

QTable bellman_q(const TabularMdp& mdp, const ValueVector& v, double gamma) {
    QTable q(mdp.n_states, mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a) {
        q.col(a) = mdp.reward.col(a) + gamma * (mdp.transition[static_cast<std::size_t>(a)] * v);
    }
    return q;
}

SolvedDiscounted solve_discounted(const TabularMdp& mdp, double gamma, double tol, long max_iterations) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0,1)");
    if (!(tol > 0.0)) throw Error(ErrorCode::NonpositiveArgument, "tolerance must be positive");

    // The optimal Bellman operator is monotone, a gamma-contraction and shifts
    // constants by gamma, so the sandwich bounds certify the distance to V*.
    // Iterates are kept as relative vector + level.
    ShiftBounds<ValueVector> bounds(gamma, mdp.n_states);
    ValueVector relative = ValueVector::Zero(mdp.n_states);
    double level = 0.0;
    bounds.push(relative, 0.0);
    for (long j = 1; j <= max_iterations; ++j) {
        ValueVector next = max_over_actions(bellman_q(mdp, relative, gamma));
        const double floor = next.minCoeff();
        relative = next.array() - floor;
        const double increment = floor - (1.0 - gamma) * level;
        level += increment;
        bounds.push(relative, increment);
        const auto off = bounds.offsets();
        // The midpoint of the sandwich is within width / 2 of V*.
        if (off.width() <= 2.0 * tol) {
            SolvedDiscounted out;
            out.gamma = gamma;
            out.v_star = relative.array() + (level + 0.5 * (off.lower + off.upper));
            out.q_star = bellman_q(mdp, out.v_star, gamma);
            out.span_v = span(out.v_star);
            out.tolerance = tol;
            out.iterations = j;
            return out;
        }
    }
    throw Error(ErrorCode::NotConverged, "value iteration exceeded its iteration cap");
}

GainBias solve_gain_bias(const TabularMdp& mdp, double tol) {
    if (!(tol > 0.0)) throw Error(ErrorCode::NonpositiveArgument, "tolerance must be positive");

    // Solve each proxy to a small fraction of the requested accuracy so that the
    // value-iteration error is negligible next to the proxy error.
    constexpr double kInnerFraction = 1e-2;
    constexpr int kMaxDoublings = 40;
    constexpr int kStagnationLimit = 12;
    // Solve on the aperiodic model P' = (I + P) / 2. It has the same gain and
    // bias 2 h*, and on periodic chains the discounted iterates of P itself
    // contract only at rate gamma0.
    constexpr double kLazy = 0.5;
    TabularMdp lazy = mdp;
    for (auto& P : lazy.transition) {
        P *= 1.0 - kLazy;
        P.diagonal().array() += kLazy;
    }
    double horizon = 2.0; // 1 / (1 - gamma0)
    double previous_error = -1.0;
    int stagnant = 0;
    for (int i = 0; i < kMaxDoublings; ++i, horizon *= 2.0) {
        const double gamma0 = 1.0 - 1.0 / horizon;
        const SolvedDiscounted solved = solve_discounted(lazy, gamma0, kInnerFraction * tol);
        const double proxy_error = solved.span_v / horizon;
        if (proxy_error <= tol) {
            GainBias out;
            out.gamma_proxy = gamma0;
            out.rho_star = solved.v_star.mean() / horizon;
            out.h_shifted = (1.0 - kLazy) * (solved.v_star.array() - solved.v_star.minCoeff());
            out.span_h = (1.0 - kLazy) * solved.span_v;
            out.error_bound = proxy_error;
            return out;
        }
        // Weakly communicating: (1 - gamma) span(V*_gamma) <= 2 (1 - gamma) span(h*)
        // eventually halves with every doubling. Without a scalar gain it
        // levels off at the gain gap instead.
        if (previous_error > 0.0 && proxy_error > 0.99 * previous_error) {
            if (++stagnant >= kStagnationLimit) {
                throw Error(ErrorCode::NotConverged,
                            "(1 - gamma) span(V*) stopped shrinking; the model has no scalar gain");
            }
        } else {
            stagnant = 0;
        }
        previous_error = proxy_error;
    }
    throw Error(ErrorCode::NotConverged, "gain/bias proxy did not reach the requested tolerance");
}

MdpMetadata metadata(const TabularMdp& mdp, const SolvedDiscounted& solved) {
    if (solved.v_star.size() != mdp.n_states) {
        throw Error(ErrorCode::DimensionMismatch, "solution does not match the model");
    }
    MdpMetadata out;
    out.is_deterministic = true;
    const ValueVector centered = solved.v_star.array() - solved.v_star.minCoeff();
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            const auto row = mdp.row(s, a);
            const int support = static_cast<int>((row.array() > 0.0).count());
            out.gamma_support = std::max(out.gamma_support, support);
            if (support != 1) out.is_deterministic = false;
            out.max_step_variance = std::max(out.max_step_variance, variance(row, centered));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// File format

using nlohmann::json;

void write_mdp(std::ostream& out, const TabularMdp& mdp) {
    json doc;
    doc["format"] = "focuslab-mdp";
    doc["version"] = 1;
    doc["n_states"] = mdp.n_states;
    doc["n_actions"] = mdp.n_actions;
    json rewards = json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        json row = json::array();
        for (int a = 0; a < mdp.n_actions; ++a) row.push_back(mdp.reward(s, a));
        rewards.push_back(std::move(row));
    }
    doc["rewards"] = std::move(rewards);
    json transitions = json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            json row = json::array();
            for (int t = 0; t < mdp.n_states; ++t) row.push_back(mdp.row(s, a)(t));
            transitions.push_back(std::move(row));
        }
    }
    doc["transitions"] = std::move(transitions);
    doc["initial_dist"] = std::vector<double>(mdp.initial_dist.data(),
                                              mdp.initial_dist.data() + mdp.initial_dist.size());
    out << doc.dump(2) << '\n';
}

void write_mdp_file(const std::filesystem::path& path, const TabularMdp& mdp) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    write_mdp(out, mdp);
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

namespace {

const json& field(const json& doc, const char* key) {
    if (!doc.contains(key)) throw Error(ErrorCode::SchemaError, std::string("missing field '") + key + "'");
    return doc.at(key);
}

std::vector<double> number_row(const json& row, std::size_t expected, const std::string& label) {
    if (!row.is_array() || row.size() != expected) {
        throw Error(ErrorCode::DimensionMismatch, label + " must be an array of " + std::to_string(expected));
    }
    std::vector<double> out;
    out.reserve(expected);
    for (const auto& x : row) {
        if (!x.is_number()) throw Error(ErrorCode::SchemaError, label + " contains a non-number");
        out.push_back(x.get<double>());
    }
    return out;
}

} // namespace

TabularMdp read_mdp(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::SchemaError, "MDP file must hold a JSON object");
    static const char* const kKnown[] = {"format", "version", "n_states", "n_actions",
                                         "rewards", "transitions", "initial_dist"};
    for (const auto& [key, _] : doc.items()) {
        if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
            throw Error(ErrorCode::SchemaError, "unknown field '" + key + "'");
        }
    }
    if (doc.contains("version") && doc["version"] != 1) {
        throw Error(ErrorCode::SchemaError, "unsupported MDP file version");
    }

    RawMdp raw;
    raw.n_states = field(doc, "n_states").get<int>();
    raw.n_actions = field(doc, "n_actions").get<int>();
    if (raw.n_states <= 0 || raw.n_actions <= 0) {
        throw Error(ErrorCode::DimensionMismatch, "n_states and n_actions must be positive");
    }
    const auto S = static_cast<std::size_t>(raw.n_states);
    const auto A = static_cast<std::size_t>(raw.n_actions);

    const json& rewards = field(doc, "rewards");
    if (!rewards.is_array() || rewards.size() != S) {
        throw Error(ErrorCode::DimensionMismatch, "rewards must have n_states rows");
    }
    raw.reward.resize(raw.n_states, raw.n_actions);
    for (std::size_t s = 0; s < S; ++s) {
        const auto row = number_row(rewards[s], A, "rewards row " + std::to_string(s));
        for (std::size_t a = 0; a < A; ++a) raw.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = row[a];
    }

    const json& transitions = field(doc, "transitions");
    if (!transitions.is_array() || transitions.size() != S * A) {
        throw Error(ErrorCode::DimensionMismatch, "transitions must have n_states * n_actions rows");
    }
    raw.transition.assign(A, Eigen::MatrixXd::Zero(raw.n_states, raw.n_states));
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            const auto row = number_row(transitions[s * A + a], S, "transitions row " + std::to_string(s * A + a));
            for (std::size_t t = 0; t < S; ++t) {
                raw.transition[a](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = row[t];
            }
        }
    }

    const auto mu = number_row(field(doc, "initial_dist"), S, "initial_dist");
    raw.initial_dist = Eigen::Map<const Eigen::VectorXd>(mu.data(), raw.n_states);
    return validate(std::move(raw));
}

TabularMdp read_mdp_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return read_mdp(in);
}

} // namespace focuslab
