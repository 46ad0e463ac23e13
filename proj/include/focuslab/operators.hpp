#pragma once

// Elementary operators on value vectors and Q-tables. These are written
// against Eigen::MatrixBase so they accept any dense expression and any
// scalar type with the usual arithmetic.

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "focuslab/error.hpp"

namespace focuslab {

using ValueVector = Eigen::VectorXd;
using QTable = Eigen::MatrixXd; // rows = states, cols = actions
using Policy = std::vector<int>;

/// Variance of v under the distribution p:  sum p v^2 - (sum p v)^2,
/// clamped at zero.
template <typename DerivedP, typename DerivedV>
typename DerivedP::Scalar variance(const Eigen::MatrixBase<DerivedP>& p,
                                   const Eigen::MatrixBase<DerivedV>& v) {
    using Scalar = typename DerivedP::Scalar;
    if (p.size() != v.size()) {
        throw Error(ErrorCode::LengthMismatch, "probability row and value vector differ in length");
    }
    const auto pv = p.derived().reshaped();
    const auto vv = v.derived().reshaped();
    const Scalar first = pv.dot(vv);
    const Scalar second = pv.dot(vv.cwiseAbs2());
    const Scalar out = second - first * first;
    return out < Scalar(0) ? Scalar(0) : out;
}

/// max(v) - min(v)
template <typename Derived>
typename Derived::Scalar span(const Eigen::MatrixBase<Derived>& v) {
    if (v.size() == 0) throw Error(ErrorCode::EmptyVector, "span of an empty vector");
    return v.maxCoeff() - v.minCoeff();
}

/// Caps every entry at min(v) + H.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
clip(const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar H) {
    using Scalar = typename Derived::Scalar;
    if (H < Scalar(0)) throw Error(ErrorCode::NegativeH, "clipping level must be nonnegative");
    if (v.size() == 0) throw Error(ErrorCode::EmptyVector, "clip of an empty vector");
    const Scalar cap = v.minCoeff() + H;
    return v.derived().reshaped().cwiseMin(cap);
}

template <typename Scalar>
struct Greedy {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> value;
    Policy policy;
};

/// Row-wise max of Q. Ties go to the lowest action index.
template <typename Derived>
Greedy<typename Derived::Scalar> greedy(const Eigen::MatrixBase<Derived>& q) {
    using Scalar = typename Derived::Scalar;
    Greedy<Scalar> out;
    out.value.resize(q.rows());
    out.policy.resize(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        Eigen::Index best = 0;
        for (Eigen::Index a = 1; a < q.cols(); ++a) {
            if (q(s, a) > q(s, best)) best = a;
        }
        out.value(s) = q(s, best);
        out.policy[static_cast<std::size_t>(s)] = static_cast<int>(best);
    }
    return out;
}

/// (MQ)(s) = max_a Q(s, a), without the argmax bookkeeping.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
max_over_actions(const Eigen::MatrixBase<Derived>& q) {
    return q.rowwise().maxCoeff();
}

} // namespace focuslab
