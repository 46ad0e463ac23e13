#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace focuslab {

/// Sandwich bounds for the fixed point of a monotone gamma-contraction F with
/// the constant-shift property F(X + c) = F(X) + gamma c.
///
/// If X_j - X_{j-L} lies entrywise in [lo, hi], then the fixed point satisfies
///   X* - X_j  in  [g_L lo, g_L hi],   g_L = gamma^L / (1 - gamma^L).
/// Several window lengths L are checked so that periodic iterates, whose
/// one-step differences oscillate while the L-step differences settle, still
/// get tight bounds.
///
/// Iterates are pushed in relative form X_j = R_j + c_j 1 as the pair
/// (R_j, c_j - c_{j-1}). With gamma close to one the levels c_j are large while
/// R_j stays of the order of the span, and taking differences of R keeps the
/// bounds accurate.
template <typename Matrix>
class ShiftBounds {
public:
    ShiftBounds(double gamma, int max_window)
        : max_window_(std::max(1, max_window)),
          factor_(static_cast<std::size_t>(max_window_) + 1, 0.0),
          relative_(static_cast<std::size_t>(max_window_) + 1),
          increment_(static_cast<std::size_t>(max_window_) + 1, 0.0) {
        const double log_gamma = std::log(gamma);
        for (int L = 1; L <= max_window_; ++L) {
            const double x = L * log_gamma;
            factor_[static_cast<std::size_t>(L)] = std::exp(x) / -std::expm1(x);
        }
    }

    /// shift_increment is c_j - c_{j-1}; ignored for the first iterate.
    void push(const Matrix& relative, double shift_increment) {
        head_ = (head_ + 1) % relative_.size();
        relative_[head_] = relative;
        increment_[head_] = shift_increment;
        count_ = std::min(count_ + 1, relative_.size());
    }

    void clear() { count_ = 0; }
    bool ready() const { return count_ >= 2; }

    struct Offsets {
        double lower = -std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
        double width() const { return upper - lower; }
    };

    /// Bounds on X* - X_j with X_j the latest iterate. Requires ready().
    Offsets offsets() const {
        Offsets out;
        const Matrix& newest = relative_[head_];
        const int available = static_cast<int>(count_) - 1;
        double level_change = 0.0;
        for (int L = 1; L <= available; ++L) {
            level_change += increment_[index(static_cast<std::size_t>(L - 1))];
            const Matrix& older = relative_[index(static_cast<std::size_t>(L))];
            const double lo = (newest - older).minCoeff() + level_change;
            const double hi = (newest - older).maxCoeff() + level_change;
            const double g = factor_[static_cast<std::size_t>(L)];
            out.lower = std::max(out.lower, g * lo);
            out.upper = std::min(out.upper, g * hi);
        }
        return out;
    }

    /// Entrywise min and max of X_j - X_{j-1}, plus its sup norm.
    struct StepRange {
        double lo = 0.0;
        double hi = 0.0;
        double sup() const { return std::max(std::abs(lo), std::abs(hi)); }
    };
    StepRange last_step() const {
        const auto diff = relative_[head_] - relative_[index(1)];
        return {diff.minCoeff() + increment_[head_], diff.maxCoeff() + increment_[head_]};
    }

private:
    std::size_t index(std::size_t steps_back) const {
        return (head_ + relative_.size() - steps_back) % relative_.size();
    }

    int max_window_;
    std::vector<double> factor_;
    std::vector<Matrix> relative_;
    std::vector<double> increment_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
};

} // namespace focuslab
