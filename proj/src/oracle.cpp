#include "otk/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "otk/rng.hpp"

namespace otk {

void DiscreteArm::validate() const {
    if (outcomes.empty() || outcomes.size() != probabilities.size())
        throw std::invalid_argument("DiscreteArm: outcomes and probabilities must align");
    double sum = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i] < 0) throw std::invalid_argument("DiscreteArm: outcomes must be non-negative");
        if (probabilities[i] < 0.0)
            throw std::invalid_argument("DiscreteArm: probabilities must be non-negative");
        sum += probabilities[i];
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteArm: probabilities must sum to 1");
}

int DiscreteArm::sample(double u01) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        acc += probabilities[i];
        if (u01 < acc) return outcomes[i];
    }
    return outcomes.back();
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 over the packed inputs; decorrelates the per-(trial, arm) tapes
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// cheap-to-seed tape stream; estimates are evaluated across thousands of
// budgets, so per-tape setup cost matters more than generator quality here
class Tape {
public:
    explicit Tape(std::uint64_t seed) : state_(seed) {}

    double uniform01() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

}  // namespace

BsEstimate bs_estimate(const std::vector<DiscreteArm>& arms, const BudgetVector& budget,
                       std::size_t k, std::size_t trials, std::uint64_t seed) {
    if (budget.size() != arms.size())
        throw std::invalid_argument("bs_estimate: budget length must equal arm count");
    if (trials == 0) throw std::invalid_argument("bs_estimate: trials must be >= 1");
    for (const auto& arm : arms) arm.validate();

    double sum = 0.0;
    double sum_sq = 0.0;
    std::vector<Score> scores;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        scores.clear();
        for (std::size_t l = 0; l < arms.size(); ++l) {
            // fresh tape per (seed, trial, arm): the first x_l draws do not
            // depend on the budget, which is what couples two estimates
            Tape tape(mix_seed(seed, trial, l));
            for (std::uint64_t i = 0; i < budget[l]; ++i)
                scores.push_back(static_cast<Score>(arms[l].sample(tape.uniform01())));
        }
        const double v = stk(scores, k);
        sum += v;
        sum_sq += v * v;
    }

    BsEstimate out;
    const auto n = static_cast<double>(trials);
    out.mean = sum / n;
    if (trials > 1) {
        const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
        out.std_error = std::sqrt(var / n);
    }
    return out;
}

namespace {

// enumerate multisets over {0..max_value} of size <= max_size as sorted vectors
void enumerate_multisets(int max_value, std::size_t max_size, std::vector<Score>& current,
                         int min_next, std::vector<std::vector<Score>>& out) {
    out.push_back(current);
    if (current.size() == max_size) return;
    for (int v = min_next; v <= max_value; ++v) {
        current.push_back(v);
        enumerate_multisets(max_value, max_size, current, v, out);
        current.pop_back();
    }
}

// multiset inclusion by multiplicity; both sorted ascending
bool multiset_leq(const std::vector<Score>& a, const std::vector<Score>& b) {
    if (a.size() > b.size()) return false;
    std::size_t j = 0;
    for (double x : a) {
        while (j < b.size() && b[j] < x) ++j;
        if (j == b.size() || b[j] != x) return false;
        ++j;
    }
    return true;
}

std::string describe(const std::vector<Score>& s) {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "}";
    return os.str();
}

}  // namespace

PropertyReport check_stk_properties(
    int max_value, std::size_t max_size, const std::vector<std::size_t>& k_range,
    const std::function<Score(std::vector<Score>, std::size_t)>& stk_fn) {
    const auto f = stk_fn ? stk_fn : [](std::vector<Score> s, std::size_t k) { return stk(std::move(s), k); };

    std::vector<std::vector<Score>> sets;
    std::vector<Score> scratch;
    enumerate_multisets(max_value, max_size, scratch, 0, sets);

    PropertyReport report;
    for (std::size_t k : k_range) {
        for (const auto& s1 : sets) {
            const double f1 = f(s1, k);
            for (int x = 0; x <= max_value; ++x) {
                auto s1x = s1;
                s1x.push_back(x);
                const double gain1 = f(s1x, k) - f1;
                ++report.checks;
                if (gain1 < 0.0) {
                    report.pass = false;
                    report.counterexample = "monotonicity: k=" + std::to_string(k) + " S=" +
                                            describe(s1) + " x=" + std::to_string(x);
                    return report;
                }
                for (const auto& s2 : sets) {
                    if (!multiset_leq(s1, s2)) continue;
                    auto s2x = s2;
                    s2x.push_back(x);
                    const double gain2 = f(s2x, k) - f(s2, k);
                    ++report.checks;
                    if (gain1 < gain2 - 1e-12) {
                        report.pass = false;
                        report.counterexample = "diminishing returns: k=" + std::to_string(k) +
                                                " S1=" + describe(s1) + " S2=" + describe(s2) +
                                                " x=" + std::to_string(x);
                        return report;
                    }
                }
            }
        }
    }
    return report;
}

double exact_gain_discrete(const std::map<int, std::uint64_t>& counts, double theta) {
    double total = 0.0;
    for (const auto& [outcome, n] : counts) total += static_cast<double>(n);
    if (total <= 0.0) return 0.0;
    double gain = 0.0;
    for (const auto& [outcome, n] : counts)
        gain += static_cast<double>(n) / total * std::max(static_cast<double>(outcome) - theta, 0.0);
    return gain;
}

std::vector<double> greedy_known_distributions(const std::vector<DiscreteArm>& arms,
                                               std::size_t k, std::size_t horizon,
                                               std::uint64_t seed, std::size_t trials) {
    if (arms.empty()) throw std::invalid_argument("greedy_known_distributions: no arms");
    if (trials == 0) throw std::invalid_argument("greedy_known_distributions: trials must be >= 1");
    for (const auto& arm : arms) arm.validate();

    const auto expected_excess = [](const DiscreteArm& arm, double theta) {
        double g = 0.0;
        for (std::size_t i = 0; i < arm.outcomes.size(); ++i)
            g += arm.probabilities[i] * std::max(static_cast<double>(arm.outcomes[i]) - theta, 0.0);
        return g;
    };

    std::vector<double> mean_stk(horizon + 1, 0.0);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(mix_seed(seed, trial, 0));
        TopKSolution solution(k);
        for (std::size_t t = 1; t <= horizon; ++t) {
            const double theta = solution.kth_score();
            std::size_t best = 0;
            double best_gain = -1.0;
            for (std::size_t l = 0; l < arms.size(); ++l) {
                const double g = expected_excess(arms[l], theta);
                if (g > best_gain) {
                    best_gain = g;
                    best = l;
                }
            }
            const int value = arms[best].sample(rng.uniform01());
            solution.insert({"t" + std::to_string(t), static_cast<Score>(value)});
            mean_stk[t] += solution.stk_value();
        }
    }
    for (double& v : mean_stk) v /= static_cast<double>(trials);
    return mean_stk;
}

}  // namespace otk
