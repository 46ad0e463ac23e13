#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "focuslab/harness.hpp"

namespace focuslab {

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Randomized check of the episode operator: constant shift, contraction and
/// monotonicity on `draws` random agents (S <= 6, A <= 4, random counts,
/// gamma in {0.5, 0.9, 0.99}) with random tables and shifts.
struct OperatorSuiteResult {
    long draws = 0;
    long shift_failures = 0;
    long contraction_failures = 0;
    long monotone_failures = 0;
    double worst_shift_error = 0.0;
    double worst_ratio_minus_gamma = -1.0;
    double seconds = 0.0;
    bool pass() const { return shift_failures == 0 && contraction_failures == 0 && monotone_failures == 0; }
};

OperatorSuiteResult operator_property_suite(long draws = 1000, std::uint64_t seed = 20240601);

/// Gain and bias span of the two-state pair (B = 10) and the gain of the
/// second prior-free member, against their closed forms.
std::vector<CheckLine> oracle_crosscheck_suite();

/// Per-run verdicts used by `verify` and the acceptance suites.
struct RunVerdict {
    ReductionCheck reduction;
    bool var_bound = false;
    double smallest_c = 0.0;
    bool episodes_ok = false;
    bool solves_monotone = true;
    bool norm_bound = true;
    long episodes_sub_solution_failed = 0;
    /// -1 when the run kept no Q-hat snapshots.
    long optimism_violations = -1;
};

RunVerdict judge_run(const RunRecord& record, const Oracles& oracles, double var_c);

} // namespace focuslab
