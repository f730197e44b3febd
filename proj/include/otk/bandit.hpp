#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otk/core.hpp"
#include "otk/histogram.hpp"
#include "otk/index.hpp"
#include "otk/rng.hpp"

namespace otk {

/// Knobs of one query. Defaults follow the library's standard configuration.
struct QueryParams {
    std::size_t k = 1;                 // cardinality limit of the solution
    std::size_t bucket_count = 8;      // histogram bins per node
    double initial_range = 0.1;        // histograms start over [0, initial_range]
    double range_growth = 1.1;         // overestimation factor when extending a range
    double fallback_frequency = 0.01;  // fraction of n between fallback checks
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;

    // feature toggles, used by ablation variants
    bool fallback_enabled = true;
    bool rebin_enabled = true;     // low-bin collapse maintenance
    bool subtract_enabled = true;  // histogram subtraction when pruning

    void validate() const;
};

enum class QueryMode { Tree, Flat, Sample };

const char* to_string(QueryMode mode);

/// Arm-selection rule run by the executor. EpsilonGreedy is the primary
/// algorithm; Ucb and RandomDescent drive the baseline strategies.
enum class SelectionPolicy { EpsilonGreedy, Ucb, RandomDescent };

/// Opaque element payload handed from the sampler to the scorer.
using Payload = nlohmann::json;

/// Black-box sampling + scoring interface. Both calls are batched; the
/// output of score_batch must have one non-negative finite score per input.
class ScorerPlugin {
public:
    virtual ~ScorerPlugin() = default;
    virtual std::vector<Payload> fetch_batch(const std::vector<ElementId>& ids) = 0;
    virtual std::vector<Score> score_batch(const std::vector<Payload>& payloads) = 0;
};

/// Probability of taking an exploration step at iteration t (1-based,
/// counted in scored elements): ceil(t / batch_size)^(-1/3).
double exploration_probability(std::uint64_t t, std::size_t batch_size);

/// Periodic fallback-check schedule: no checks during the warmup fraction of
/// the dataset, then one check every check_fraction of the dataset.
struct FallbackSchedule {
    double warmup_fraction = 0.3;
    double check_fraction = 0.01;
    std::int64_t last_check_t = -1;

    bool due(std::uint64_t t, std::size_t n) const;
    void mark(std::uint64_t t) { last_check_t = static_cast<std::int64_t>(t); }
};

/// One node of a query's private working tree.
struct WorkingNode {
    std::string node_id;
    int parent = -1;
    std::vector<int> children;         // indices into QueryState::nodes; empty on leaves
    bool leaf = false;
    bool alive = true;
    HistogramSketch sketch;
    std::vector<ElementId> draw_order;  // leaves: pre-shuffled ids, consumed from cursor
    std::size_t cursor = 0;
    // per-node reward statistics (UCB baseline)
    std::uint64_t visits = 0;
    double gain_sum = 0.0;

    std::size_t remaining_count() const { return draw_order.size() - cursor; }
};

struct StepResult {
    ElementId id;
    Score score = 0.0;
    Score gain = 0.0;
};

/// All mutable state of one in-flight query: the solution, the working tree
/// mirror of the index, and the bookkeeping the fallback detectors consume.
/// One QueryState is owned by one logical thread of control.
class QueryState {
public:
    QueryState(const Index& index, QueryParams params,
               SelectionPolicy policy = SelectionPolicy::EpsilonGreedy);

    QueryParams params;
    SelectionPolicy policy = SelectionPolicy::EpsilonGreedy;
    std::size_t dataset_size = 0;  // n
    std::uint64_t t = 0;           // elements scored so far
    TopKSolution solution;
    QueryMode mode = QueryMode::Tree;
    Rng rng;
    FallbackSchedule schedule;

    std::vector<WorkingNode> nodes;
    int root = -1;
    std::vector<int> arms;                  // Flat mode: live leaf node indices
    std::vector<ElementId> sample_queue;    // Sample mode: shuffled remaining ids
    std::size_t sample_cursor = 0;

    // dynamic latency estimates, seconds per element
    double scorer_latency_ema = 0.0;
    double overhead_latency_ema = 0.0;
    bool latency_initialized = false;

    // accounting
    std::uint64_t exploration_steps = 0;
    double scorer_seconds_total = 0.0;
    double overhead_seconds_total = 0.0;
    double elapsed_seconds_total = 0.0;

    /// Monotonic clock, seconds. Injectable for deterministic tests.
    std::function<double()> clock;

    bool exhausted() const { return remaining_total_ == 0; }
    std::size_t remaining_total() const { return remaining_total_; }

    /// Select the leaf to sample next: one exploration coin governs the
    /// whole descent. Requires Tree or Flat mode and a non-exhausted state.
    int choose_leaf();

    /// Greedy descent (no coin): maximize expected gain at every layer,
    /// breaking ties uniformly at random.
    int descend_greedy();

    /// Uniform random descent over non-empty children.
    int descend_random();

    /// Draw, fetch and score up to batch_size elements from one selected
    /// arm, then update the solution and every histogram on the root-to-leaf
    /// path. Plugin failures abort before any state changes.
    std::vector<StepResult> step_batch(ScorerPlugin& plugin);

    /// Drop an exhausted leaf, subtracting its sketch from every ancestor;
    /// ancestors left childless are dropped the same way.
    void prune_empty(int leaf_index);

    std::vector<int> live_leaves() const;
    int find_node(const std::string& node_id) const;
    const WorkingNode& node(int i) const { return nodes[static_cast<std::size_t>(i)]; }
    WorkingNode& node(int i) { return nodes[static_cast<std::size_t>(i)]; }

    double last_batch_scorer_seconds = 0.0;

private:
    int build_nodes(const IndexNode& src, int parent);
    int ucb_descend();
    std::vector<ElementId> peek_ids(int leaf_index, std::size_t count) const;
    void apply_scored_element(int leaf_index, const ElementId& id, Score score,
                              std::vector<StepResult>& out);

    std::size_t remaining_total_ = 0;
};

struct StopCondition {
    std::optional<std::uint64_t> max_iterations;  // stop once t >= limit
    std::optional<double> max_seconds;            // executor-internal elapsed time
};

struct BatchEvent {
    std::uint64_t t = 0;
    double elapsed_seconds = 0.0;   // cumulative, excludes observer time
    double overhead_seconds = 0.0;  // cumulative non-plugin portion
    Score stk = 0.0;
    const char* mode = "";
    const TopKSolution& solution;
};

struct ModeChangeEvent {
    std::uint64_t t = 0;
    QueryMode from = QueryMode::Tree;
    QueryMode to = QueryMode::Tree;
    std::string reason;
};

struct QueryObserver {
    std::function<void(const BatchEvent&)> on_batch;
    std::function<void(const ModeChangeEvent&)> on_mode_change;
};

/// Run one anytime query to its stop condition (iteration limit, time limit
/// or exhaustion), invoking the observer after every batch. Returns the
/// final solution.
TopKSolution run_query(QueryState& state, ScorerPlugin& plugin,
                       const StopCondition& stop = {}, const QueryObserver& observer = {});

TopKSolution run_query(const Index& index, const QueryParams& params, ScorerPlugin& plugin,
                       const StopCondition& stop = {}, const QueryObserver& observer = {});

}  // namespace otk
