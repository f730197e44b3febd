#include <doctest.h>

#include <cmath>

#include "otk/histogram.hpp"
#include "otk/oracle.hpp"
#include "otk/rng.hpp"

using namespace otk;

namespace {

DiscreteArm uniform_arm(std::vector<int> outcomes) {
    DiscreteArm arm;
    arm.outcomes = std::move(outcomes);
    arm.probabilities.assign(arm.outcomes.size(), 1.0 / static_cast<double>(arm.outcomes.size()));
    double sum = 0.0;
    for (double p : arm.probabilities) sum += p;
    arm.probabilities.back() += 1.0 - sum;
    return arm;
}

DiscreteArm random_arm(Rng& rng, int max_outcome) {
    DiscreteArm arm;
    double total = 0.0;
    for (int v = 0; v <= max_outcome; ++v) {
        arm.outcomes.push_back(v);
        const double w = rng.uniform01() + 1e-3;
        arm.probabilities.push_back(w);
        total += w;
    }
    for (auto& p : arm.probabilities) p /= total;
    double sum = 0.0;
    for (double p : arm.probabilities) sum += p;
    arm.probabilities.back() += 1.0 - sum;
    return arm;
}

// mean STK of sampling a fixed arm T times (same tape construction scale)
double fixed_arm_mean(const DiscreteArm& arm, std::size_t k, std::size_t horizon,
                      std::size_t trials, std::uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::vector<Score> scores;
        for (std::size_t t = 0; t < horizon; ++t)
            scores.push_back(static_cast<Score>(arm.sample(rng.uniform01())));
        sum += stk(scores, k);
    }
    return sum / static_cast<double>(trials);
}

double random_policy_mean(const std::vector<DiscreteArm>& arms, std::size_t k,
                          std::size_t horizon, std::size_t trials, std::uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::vector<Score> scores;
        for (std::size_t t = 0; t < horizon; ++t) {
            const auto& arm = arms[rng.uniform_int(arms.size())];
            scores.push_back(static_cast<Score>(arm.sample(rng.uniform01())));
        }
        sum += stk(scores, k);
    }
    return sum / static_cast<double>(trials);
}

}  // namespace

TEST_CASE("bs_estimate basics") {
    const std::vector<DiscreteArm> arms{uniform_arm({5}), uniform_arm({0, 1})};

    SUBCASE("all-zero budget is worth nothing") {
        const BsEstimate e = bs_estimate(arms, {0, 0}, 2, 100, 1);
        CHECK(e.mean == 0.0);
        CHECK(e.std_error == 0.0);
    }

    SUBCASE("point mass arm is deterministic") {
        const BsEstimate e = bs_estimate({uniform_arm({5})}, {3}, 2, 500, 1);
        CHECK(e.mean == 10.0);  // 5 + 5, capped at k = 2
        CHECK(e.std_error == 0.0);
    }

    SUBCASE("same seed gives identical estimates") {
        const BsEstimate a = bs_estimate(arms, {2, 3}, 2, 1000, 9);
        const BsEstimate b = bs_estimate(arms, {2, 3}, 2, 1000, 9);
        CHECK(a.mean == b.mean);
        CHECK(a.std_error == b.std_error);
    }

    SUBCASE("budget length must match") {
        CHECK_THROWS_AS(bs_estimate(arms, {1}, 2, 10, 1), std::invalid_argument);
    }
}

TEST_CASE("coupled estimates satisfy monotonicity and diminishing returns") {
    Rng rng(42);
    std::vector<DiscreteArm> arms{random_arm(rng, 5), random_arm(rng, 5), random_arm(rng, 5)};
    const std::size_t trials = 4000;
    const std::uint64_t seed = 31;

    for (std::size_t k : {1, 2, 3}) {
        // monotonicity: adding one pull never hurts, per coupled tape
        for (std::uint64_t a = 0; a <= 2; ++a)
            for (std::uint64_t b = 0; b <= 2; ++b) {
                const BsEstimate base = bs_estimate(arms, {a, b, 1}, k, trials, seed);
                for (int coord = 0; coord < 3; ++coord) {
                    BudgetVector plus{a, b, 1};
                    ++plus[static_cast<std::size_t>(coord)];
                    const BsEstimate up = bs_estimate(arms, plus, k, trials, seed);
                    const double pooled =
                        std::sqrt(up.std_error * up.std_error + base.std_error * base.std_error);
                    CHECK(up.mean - base.mean >= -3.0 * pooled - 1e-12);
                }
            }

        // diminishing returns along a chain X <= Y
        const BsEstimate x = bs_estimate(arms, {1, 0, 0}, k, trials, seed);
        const BsEstimate xp = bs_estimate(arms, {2, 0, 0}, k, trials, seed);
        const BsEstimate y = bs_estimate(arms, {1, 2, 2}, k, trials, seed);
        const BsEstimate yp = bs_estimate(arms, {2, 2, 2}, k, trials, seed);
        const double lhs = xp.mean - x.mean;
        const double rhs = yp.mean - y.mean;
        const double pooled = std::sqrt(xp.std_error * xp.std_error + x.std_error * x.std_error +
                                        yp.std_error * yp.std_error + y.std_error * y.std_error);
        CHECK(lhs - rhs >= -3.0 * pooled - 1e-12);
    }
}

TEST_CASE("exhaustive stk property check") {
    SUBCASE("the real function passes") {
        const PropertyReport r = check_stk_properties(3, 4, {1, 2, 3});
        CHECK(r.pass);
        CHECK(r.counterexample.empty());
        CHECK(r.checks > 1000);
    }

    SUBCASE("k=1 reduces to a max-threshold comparison and passes") {
        const PropertyReport r = check_stk_properties(2, 3, {1});
        CHECK(r.pass);
    }

    SUBCASE("a broken variant summing the k smallest is caught") {
        const auto broken = [](std::vector<Score> scores, std::size_t k) {
            std::sort(scores.begin(), scores.end());
            Score sum = 0.0;
            for (std::size_t i = 0; i < std::min(k, scores.size()); ++i) sum += scores[i];
            return sum;
        };
        const PropertyReport r = check_stk_properties(3, 4, {2}, broken);
        CHECK_FALSE(r.pass);
        CHECK_FALSE(r.counterexample.empty());
    }
}

TEST_CASE("exact_gain_discrete matches hand calculations") {
    CHECK(exact_gain_discrete({{5, 1}}, 3.0) == doctest::Approx(2.0));
    CHECK(exact_gain_discrete({{1, 2}, {10, 2}}, 4.0) == doctest::Approx(3.0));
    CHECK(exact_gain_discrete({{2, 4}}, 2.0) == 0.0);
    CHECK(exact_gain_discrete({}, 1.0) == 0.0);

    SUBCASE("non-increasing in theta, zero beyond the max outcome") {
        const std::map<int, std::uint64_t> counts{{0, 3}, {2, 2}, {7, 1}};
        double prev = exact_gain_discrete(counts, 0.0);
        for (double theta = 0.25; theta <= 8.0; theta += 0.25) {
            const double g = exact_gain_discrete(counts, theta);
            CHECK(g <= prev + 1e-12);
            prev = g;
        }
        CHECK(exact_gain_discrete(counts, 7.0) == 0.0);
    }
}

TEST_CASE("discrete gain agrees with the histogram estimator on integer data") {
    // integer outcomes {0..7} land in unit bins [v, v+1) whose centers sit
    // half a unit above the outcome; evaluating the sketch at theta + 0.5
    // cancels the shift for every whole bin, leaving only the partial-bin
    // term 0.125 * p_theta, far inside the 10% budget for low thresholds
    Rng rng(88);
    for (int round = 0; round < 10; ++round) {
        HistogramSketch aligned(8, 8.0);
        std::map<int, std::uint64_t> counts;
        for (int i = 0; i < 60; ++i) {
            const int v = static_cast<int>(rng.uniform_int(8));
            ++counts[v];
            aligned.record(static_cast<double>(v));
        }
        for (int theta = 0; theta <= 3; ++theta) {
            const double exact = exact_gain_discrete(counts, theta);
            const double approx = aligned.expected_gain(theta + 0.5);
            REQUIRE(exact > 1e-9);
            CHECK(std::abs(approx - exact) / exact <= 0.10);
        }
    }
}

TEST_CASE("greedy with known distributions") {
    SUBCASE("single point-mass arm accumulates deterministically") {
        const auto traj = greedy_known_distributions({uniform_arm({4})}, 3, 6, 1, 50);
        REQUIRE(traj.size() == 7);
        CHECK(traj[0] == 0.0);
        CHECK(traj[1] == doctest::Approx(4.0));
        CHECK(traj[3] == doctest::Approx(12.0));
        CHECK(traj[6] == doctest::Approx(12.0));  // capped at k = 3
    }

    SUBCASE("stochastically dominant arm is chosen every step") {
        const std::vector<DiscreteArm> arms{uniform_arm({0, 1}), uniform_arm({2, 3})};
        const std::size_t horizon = 20;
        const auto traj = greedy_known_distributions(arms, horizon, horizon, 7, 400);
        // k >= T so every sample counts; the dominant arm averages 2.5
        CHECK(traj[horizon] > 2.0 * static_cast<double>(horizon));
    }

    SUBCASE("final value clears the 1 - 1/e floor against simple policies") {
        Rng rng(3);
        for (int instance = 0; instance < 4; ++instance) {
            const std::vector<DiscreteArm> arms{random_arm(rng, 5), random_arm(rng, 5),
                                                random_arm(rng, 5)};
            const std::size_t k = 1 + instance % 3;
            const std::size_t horizon = 12;
            const std::size_t trials = 3000;

            const auto greedy = greedy_known_distributions(arms, k, horizon, 11, trials);
            double best_other = random_policy_mean(arms, k, horizon, trials, 12);
            for (const auto& arm : arms)
                best_other = std::max(best_other, fixed_arm_mean(arm, k, horizon, trials, 13));

            CHECK(greedy[horizon] >= (1.0 - std::exp(-1.0)) * best_other * 0.98);
        }
    }
}
