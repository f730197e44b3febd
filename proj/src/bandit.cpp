#include "otk/bandit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "otk/fallback.hpp"

namespace otk {

void QueryParams::validate() const {
    if (k == 0) throw std::invalid_argument("QueryParams: k must be positive");
    if (bucket_count < 2) throw std::invalid_argument("QueryParams: bucket_count must be >= 2");
    if (!(initial_range > 0.0)) throw std::invalid_argument("QueryParams: initial_range must be positive");
    if (!(range_growth >= 1.0)) throw std::invalid_argument("QueryParams: range_growth must be >= 1");
    if (!(fallback_frequency >= 0.0 && fallback_frequency <= 1.0))
        throw std::invalid_argument("QueryParams: fallback_frequency must be in [0, 1]");
    if (batch_size == 0) throw std::invalid_argument("QueryParams: batch_size must be positive");
}

const char* to_string(QueryMode mode) {
    switch (mode) {
        case QueryMode::Tree: return "TREE";
        case QueryMode::Flat: return "FLAT";
        case QueryMode::Sample: return "SAMPLE";
    }
    return "?";
}

double exploration_probability(std::uint64_t t, std::size_t batch_size) {
    if (t == 0) throw std::invalid_argument("exploration_probability: t must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("exploration_probability: batch_size must be >= 1");
    const double effective = static_cast<double>((t + batch_size - 1) / batch_size);
    return std::pow(effective, -1.0 / 3.0);
}

bool FallbackSchedule::due(std::uint64_t t, std::size_t n) const {
    const auto warmup = static_cast<std::uint64_t>(
        std::ceil(warmup_fraction * static_cast<double>(n)));
    if (t < warmup) return false;
    if (last_check_t < 0) return true;
    const auto interval = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::ceil(check_fraction * static_cast<double>(n))));
    return t - static_cast<std::uint64_t>(last_check_t) >= interval;
}

QueryState::QueryState(const Index& index, QueryParams p, SelectionPolicy pol)
    : params(std::move(p)),
      policy(pol),
      dataset_size(index.dataset_size),
      solution(params.k),
      rng(params.seed) {
    params.validate();
    schedule.check_fraction = params.fallback_frequency;
    clock = [] {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    };

    root = build_nodes(index.root, -1);
    for (auto& n : nodes) {
        if (!n.leaf) continue;
        rng.shuffle(n.draw_order);
        remaining_total_ += n.draw_order.size();
    }
}

int QueryState::build_nodes(const IndexNode& src, int parent) {
    const int self = static_cast<int>(nodes.size());
    nodes.emplace_back();
    {
        WorkingNode& n = nodes.back();
        n.node_id = src.node_id;
        n.parent = parent;
        n.leaf = src.is_leaf();
        n.sketch = HistogramSketch(params.bucket_count, params.initial_range);
        if (n.leaf) n.draw_order = src.elements;
    }
    for (const IndexNode& child : src.children) {
        const int c = build_nodes(child, self);
        nodes[static_cast<std::size_t>(self)].children.push_back(c);
    }
    return self;
}

std::vector<int> QueryState::live_leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].leaf && nodes[i].alive) out.push_back(static_cast<int>(i));
    return out;
}

int QueryState::find_node(const std::string& node_id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].node_id == node_id) return static_cast<int>(i);
    return -1;
}

namespace {

// argmax with uniform random tie-breaking; keys computed by `key`
template <typename KeyFn>
int pick_best(const std::vector<int>& candidates, Rng& rng, KeyFn&& key) {
    double best = -std::numeric_limits<double>::infinity();
    static thread_local std::vector<int> pool;
    pool.clear();
    for (int c : candidates) {
        const double v = key(c);
        if (v > best) {
            best = v;
            pool.clear();
            pool.push_back(c);
        } else if (v == best) {
            pool.push_back(c);
        }
    }
    if (pool.size() == 1) return pool.front();
    return pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
}

}  // namespace

int QueryState::descend_greedy() {
    const double theta = solution.kth_score();
    const auto gain = [&](int c) { return nodes[static_cast<std::size_t>(c)].sketch.expected_gain(theta); };
    if (mode == QueryMode::Flat) return pick_best(arms, rng, gain);
    int cur = root;
    while (!nodes[static_cast<std::size_t>(cur)].leaf)
        cur = pick_best(nodes[static_cast<std::size_t>(cur)].children, rng, gain);
    return cur;
}

int QueryState::descend_random() {
    if (mode == QueryMode::Flat)
        return arms[static_cast<std::size_t>(rng.uniform_int(arms.size()))];
    int cur = root;
    while (!nodes[static_cast<std::size_t>(cur)].leaf) {
        const auto& ch = nodes[static_cast<std::size_t>(cur)].children;
        cur = ch[static_cast<std::size_t>(rng.uniform_int(ch.size()))];
    }
    return cur;
}

int QueryState::ucb_descend() {
    int cur = root;
    while (!nodes[static_cast<std::size_t>(cur)].leaf) {
        const auto& ch = nodes[static_cast<std::size_t>(cur)].children;
        static thread_local std::vector<int> unvisited;
        unvisited.clear();
        std::uint64_t layer_pulls = 0;
        for (int c : ch) {
            const auto& n = nodes[static_cast<std::size_t>(c)];
            layer_pulls += n.visits;
            if (n.visits == 0) unvisited.push_back(c);
        }
        if (!unvisited.empty()) {
            cur = unvisited[static_cast<std::size_t>(rng.uniform_int(unvisited.size()))];
            continue;
        }
        cur = pick_best(ch, rng, [&](int c) {
            const auto& n = nodes[static_cast<std::size_t>(c)];
            const double mean = n.gain_sum / static_cast<double>(n.visits);
            const double bonus = std::sqrt(2.0 * std::log(static_cast<double>(layer_pulls)) /
                                           static_cast<double>(n.visits));
            return mean + 1.0 * bonus;
        });
    }
    return cur;
}

int QueryState::choose_leaf() {
    if (mode == QueryMode::Sample)
        throw std::logic_error("choose_leaf: not available in SAMPLE mode");
    if (exhausted()) throw std::logic_error("choose_leaf: query is exhausted");

    switch (policy) {
        case SelectionPolicy::Ucb:
            return ucb_descend();
        case SelectionPolicy::RandomDescent:
            return descend_random();
        case SelectionPolicy::EpsilonGreedy:
            break;
    }
    const double eps = exploration_probability(t + 1, params.batch_size);
    if (rng.uniform01() < eps) {
        ++exploration_steps;
        return descend_random();
    }
    return descend_greedy();
}

std::vector<ElementId> QueryState::peek_ids(int leaf_index, std::size_t count) const {
    const WorkingNode& leaf = nodes[static_cast<std::size_t>(leaf_index)];
    return {leaf.draw_order.begin() + static_cast<std::ptrdiff_t>(leaf.cursor),
            leaf.draw_order.begin() + static_cast<std::ptrdiff_t>(leaf.cursor + count)};
}

void QueryState::apply_scored_element(int leaf_index, const ElementId& id, Score score,
                                      std::vector<StepResult>& out) {
    static thread_local std::vector<int> path;
    path.clear();
    for (int cur = leaf_index; cur != -1; cur = nodes[static_cast<std::size_t>(cur)].parent)
        path.push_back(cur);

    const bool histograms = policy == SelectionPolicy::EpsilonGreedy;
    if (histograms) {
        for (int n : path) {
            auto& sk = nodes[static_cast<std::size_t>(n)].sketch;
            if (score > sk.max_edge()) sk.extend_range(score, params.range_growth);
        }
    }

    const InsertResult ins = solution.insert({id, score});

    if (histograms) {
        const double kth = solution.kth_score();
        for (int n : path) {
            auto& sk = nodes[static_cast<std::size_t>(n)].sketch;
            if (params.rebin_enabled && kth > sk.edges()[2]) sk.collapse_low(kth);
            sk.record(score);
        }
    } else if (policy == SelectionPolicy::Ucb) {
        for (int n : path) {
            auto& node = nodes[static_cast<std::size_t>(n)];
            ++node.visits;
            node.gain_sum += ins.gain;
        }
    }

    ++t;
    out.push_back({id, score, ins.gain});
}

std::vector<StepResult> QueryState::step_batch(ScorerPlugin& plugin) {
    if (exhausted()) throw std::logic_error("step_batch: query is exhausted");

    int leaf_index = -1;
    std::vector<ElementId> ids;
    if (mode == QueryMode::Sample) {
        const std::size_t count = std::min(params.batch_size, sample_queue.size() - sample_cursor);
        ids.assign(sample_queue.begin() + static_cast<std::ptrdiff_t>(sample_cursor),
                   sample_queue.begin() + static_cast<std::ptrdiff_t>(sample_cursor + count));
    } else {
        leaf_index = choose_leaf();
        const auto& leaf = nodes[static_cast<std::size_t>(leaf_index)];
        ids = peek_ids(leaf_index, std::min(params.batch_size, leaf.remaining_count()));
    }

    // fetch + score + validate before mutating any state, so a plugin
    // failure leaves the query replayable
    const double t0 = clock();
    const std::vector<Payload> payloads = plugin.fetch_batch(ids);
    if (payloads.size() != ids.size())
        throw std::runtime_error("scorer plugin: fetch_batch returned " +
                                 std::to_string(payloads.size()) + " payloads for " +
                                 std::to_string(ids.size()) + " ids");
    const std::vector<Score> scores = plugin.score_batch(payloads);
    const double t1 = clock();
    last_batch_scorer_seconds = t1 - t0;
    if (scores.size() != ids.size())
        throw std::runtime_error("scorer plugin: score_batch returned " +
                                 std::to_string(scores.size()) + " scores for " +
                                 std::to_string(ids.size()) + " ids");
    for (Score s : scores)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw std::runtime_error("scorer plugin: score must be non-negative and finite");

    std::vector<StepResult> out;
    out.reserve(ids.size());
    if (mode == QueryMode::Sample) {
        sample_cursor += ids.size();
        remaining_total_ -= ids.size();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const InsertResult ins = solution.insert({ids[i], scores[i]});
            ++t;
            out.push_back({ids[i], scores[i], ins.gain});
        }
        return out;
    }

    auto& leaf = nodes[static_cast<std::size_t>(leaf_index)];
    leaf.cursor += ids.size();
    remaining_total_ -= ids.size();
    for (std::size_t i = 0; i < ids.size(); ++i)
        apply_scored_element(leaf_index, ids[i], scores[i], out);
    if (leaf.remaining_count() == 0) prune_empty(leaf_index);
    return out;
}

void QueryState::prune_empty(int leaf_index) {
    WorkingNode& leaf = nodes[static_cast<std::size_t>(leaf_index)];
    if (!leaf.leaf) throw std::logic_error("prune_empty: not a leaf");
    if (leaf.remaining_count() != 0) throw std::logic_error("prune_empty: leaf still has elements");

    if (mode == QueryMode::Flat) {
        leaf.alive = false;
        std::erase(arms, leaf_index);
        return;
    }

    int cur = leaf_index;
    while (cur != -1) {
        WorkingNode& victim = nodes[static_cast<std::size_t>(cur)];
        if (params.subtract_enabled) {
            for (int anc = victim.parent; anc != -1; anc = nodes[static_cast<std::size_t>(anc)].parent)
                nodes[static_cast<std::size_t>(anc)].sketch.subtract(victim.sketch);
        }
        victim.alive = false;
        const int parent = victim.parent;
        if (parent == -1) break;
        auto& siblings = nodes[static_cast<std::size_t>(parent)].children;
        std::erase(siblings, cur);
        if (!siblings.empty()) break;
        cur = parent;
    }
}

TopKSolution run_query(QueryState& state, ScorerPlugin& plugin, const StopCondition& stop,
                       const QueryObserver& observer) {
    while (true) {
        if (state.exhausted()) break;
        if (stop.max_iterations && state.t >= *stop.max_iterations) break;
        if (stop.max_seconds && state.elapsed_seconds_total >= *stop.max_seconds) break;

        const double t0 = state.clock();

        bool mode_changed = false;
        ModeChangeEvent change;
        if (state.policy == SelectionPolicy::EpsilonGreedy && state.params.fallback_enabled &&
            state.mode != QueryMode::Sample && state.schedule.due(state.t, state.dataset_size)) {
            state.schedule.mark(state.t);
            if (state.mode == QueryMode::Tree && tree_fallback_triggered(state)) {
                change = {state.t, QueryMode::Tree, QueryMode::Flat,
                          "greedy descent disagrees with the greedy arm"};
                flatten(state);
                mode_changed = true;
            } else if (state.latency_initialized && cluster_fallback_triggered(state)) {
                change = {state.t, state.mode, QueryMode::Sample,
                          "uniform sampling slope exceeds bandit slope"};
                fallback_to_sample(state);
                mode_changed = true;
            }
        }

        const auto results = state.step_batch(plugin);
        const double t1 = state.clock();

        const double batch_seconds = std::max(0.0, t1 - t0);
        const double plugin_seconds = std::min(state.last_batch_scorer_seconds, batch_seconds);
        const double overhead_seconds = batch_seconds - plugin_seconds;
        const auto batch_n = static_cast<double>(results.size());
        const double scorer_per_elem = plugin_seconds / batch_n;
        const double overhead_per_elem = overhead_seconds / batch_n;
        if (!state.latency_initialized) {
            state.scorer_latency_ema = scorer_per_elem;
            state.overhead_latency_ema = overhead_per_elem;
            state.latency_initialized = true;
        } else {
            state.scorer_latency_ema = 0.9 * state.scorer_latency_ema + 0.1 * scorer_per_elem;
            state.overhead_latency_ema = 0.9 * state.overhead_latency_ema + 0.1 * overhead_per_elem;
        }
        state.scorer_seconds_total += plugin_seconds;
        state.overhead_seconds_total += overhead_seconds;
        state.elapsed_seconds_total += batch_seconds;

        if (mode_changed && observer.on_mode_change) observer.on_mode_change(change);
        if (observer.on_batch)
            observer.on_batch({state.t, state.elapsed_seconds_total, state.overhead_seconds_total,
                               state.solution.stk_value(), to_string(state.mode), state.solution});
    }
    return state.solution;
}

TopKSolution run_query(const Index& index, const QueryParams& params, ScorerPlugin& plugin,
                       const StopCondition& stop, const QueryObserver& observer) {
    QueryState state(index, params);
    return run_query(state, plugin, stop, observer);
}

}  // namespace otk
