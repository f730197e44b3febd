#include "otk/fallback.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace otk {

namespace {

// argmax by (gain, then smallest node_id); candidates must be non-empty
int deterministic_best(const QueryState& state, const std::vector<int>& candidates, double theta) {
    int best = -1;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (int c : candidates) {
        const auto& n = state.node(c);
        const double g = n.sketch.expected_gain(theta);
        if (g > best_gain || (g == best_gain && best >= 0 && n.node_id < state.node(best).node_id)) {
            best = c;
            best_gain = g;
        }
    }
    return best;
}

}  // namespace

bool tree_fallback_triggered(const QueryState& state) {
    if (state.mode != QueryMode::Tree)
        throw std::logic_error("tree_fallback_triggered: requires TREE mode");
    const std::vector<int> leaves = state.live_leaves();
    if (leaves.size() <= 1) return false;

    const double theta = state.solution.kth_score();
    const int greedy_arm = deterministic_best(state, leaves, theta);

    int cur = state.root;
    while (!state.node(cur).leaf)
        cur = deterministic_best(state, state.node(cur).children, theta);

    return state.node(cur).node_id != state.node(greedy_arm).node_id;
}

void flatten(QueryState& state) {
    if (state.mode != QueryMode::Tree)
        throw std::logic_error("flatten: mode transition is one-way; requires TREE mode");
    state.arms = state.live_leaves();
    for (auto& n : state.nodes) {
        if (n.leaf) {
            n.parent = -1;  // leaf histograms are now the only ones maintained
        } else {
            n.alive = false;
        }
    }
    state.root = -1;
    state.mode = QueryMode::Flat;
}

bool cluster_fallback_triggered(const QueryState& state) {
    if (state.mode == QueryMode::Sample)
        throw std::logic_error("cluster_fallback_triggered: requires TREE or FLAT mode");
    if (!state.latency_initialized)
        throw std::logic_error("cluster_fallback_triggered: latency estimates not initialized");

    const std::vector<int> arms =
        state.mode == QueryMode::Flat ? state.arms : state.live_leaves();
    const double theta = state.solution.kth_score();

    double max_gain = 0.0;
    double weighted_gain = 0.0;
    double total_remaining = 0.0;
    for (int a : arms) {
        const auto& n = state.node(a);
        const double g = n.sketch.expected_gain(theta);
        const auto rem = static_cast<double>(n.remaining_count());
        max_gain = std::max(max_gain, g);
        weighted_gain += rem * g;
        total_remaining += rem;
    }
    if (total_remaining <= 0.0) return false;

    const double scorer_latency = std::max(state.scorer_latency_ema, 1e-12);
    const double bandit_latency = std::max(state.overhead_latency_ema, 0.0);
    const double slope_bandit = max_gain / (scorer_latency + bandit_latency);
    const double slope_sample = weighted_gain / (total_remaining * scorer_latency);
    return slope_sample > slope_bandit;
}

void fallback_to_sample(QueryState& state) {
    if (state.mode == QueryMode::Sample)
        throw std::logic_error("fallback_to_sample: mode transition is one-way");

    const std::vector<int> arms =
        state.mode == QueryMode::Flat ? state.arms : state.live_leaves();
    state.sample_queue.clear();
    state.sample_queue.reserve(state.remaining_total());
    for (int a : arms) {
        const auto& n = state.node(a);
        state.sample_queue.insert(state.sample_queue.end(),
                                  n.draw_order.begin() + static_cast<std::ptrdiff_t>(n.cursor),
                                  n.draw_order.end());
    }
    state.rng.shuffle(state.sample_queue);
    state.sample_cursor = 0;
    for (auto& n : state.nodes) n.alive = false;
    state.arms.clear();
    state.root = -1;
    state.mode = QueryMode::Sample;
}

}  // namespace otk
