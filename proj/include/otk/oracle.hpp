#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "otk/core.hpp"

namespace otk {

/// Finite discrete score distribution over non-negative integers.
struct DiscreteArm {
    std::vector<int> outcomes;
    std::vector<double> probabilities;

    void validate() const;  // probabilities sum to 1 within 1e-12
    int sample(double u01) const;
};

/// Per-arm sampling allowance.
using BudgetVector = std::vector<std::uint64_t>;

struct BsEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo estimate of the expected STK of sampling each arm according
/// to its budget. Sample tapes are derived from (seed, trial, arm) only, so
/// two estimates with the same seed are coupled: their tapes coincide and
/// budget comparisons hold per realization, not just in expectation.
BsEstimate bs_estimate(const std::vector<DiscreteArm>& arms, const BudgetVector& budget,
                       std::size_t k, std::size_t trials, std::uint64_t seed);

struct PropertyReport {
    bool pass = true;
    std::uint64_t checks = 0;
    std::string counterexample;  // empty when pass
};

/// Exhaustively check monotonicity and the diminishing-returns inequality of
/// an STK-like function over all multisets drawn from {0..max_value} with
/// size <= max_size, for each k in k_range. The function under test is a
/// parameter so deliberately broken variants can be shown to fail.
PropertyReport check_stk_properties(
    int max_value, std::size_t max_size, const std::vector<std::size_t>& k_range,
    const std::function<Score(std::vector<Score>, std::size_t)>& stk_fn = {});

/// Expected marginal gain of one draw from empirical outcome counts:
/// sum_x (N_x / N) * max(x - theta, 0).
double exact_gain_discrete(const std::map<int, std::uint64_t>& counts, double theta);

/// Mean STK trajectory (index t, length T+1, entry 0 is 0) of the adaptive
/// greedy policy that knows every arm's true distribution: at each step it
/// samples the arm with the highest exact expected gain against the current
/// k-th score. Serves as the near-optimal reference for regret comparisons.
std::vector<double> greedy_known_distributions(const std::vector<DiscreteArm>& arms,
                                               std::size_t k, std::size_t horizon,
                                               std::uint64_t seed, std::size_t trials);

}  // namespace otk
