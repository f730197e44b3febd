#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otk/bandit.hpp"
#include "otk/core.hpp"

namespace otk {

/// Reference strategies sharing the executor's sampling and metrics
/// plumbing. The three scan variants need a precomputed full score table.
enum class BaselineKind { Ucb, ExplorationOnly, UniformSample, ScanBest, ScanWorst, SortedScan };

const char* to_string(BaselineKind kind);

/// Parse names like "ucb", "exploration-only", "uniform-sample", ...
BaselineKind baseline_from_string(const std::string& name);

/// Full table of exact scores, one entry per dataset element.
using ScoreTable = std::vector<ScoredElement>;

/// UCB1 descent over the working tree: per layer, pick the child maximizing
/// mean gain + sqrt(2 ln(t) / visits); unvisited children first.
int ucb_choose(QueryState& state);

/// Uniform random descent over non-empty children.
int exploration_only_choose(QueryState& state);

/// Pre-shuffled scan order over the whole domain, deterministic per seed.
std::vector<ElementId> uniform_sample_order(const std::vector<ElementId>& ids, std::uint64_t seed);

struct OracleOrders {
    std::vector<ElementId> best;   // descending score, ties by ascending id
    std::vector<ElementId> worst;  // ascending score, ties by ascending id
};

/// Best-case and worst-case scan orders for a known score table.
OracleOrders oracle_orders(const ScoreTable& table);

/// Exact top-k by table lookup; skips scoring entirely.
TopKSolution sorted_scan(const ScoreTable& table, std::size_t k);

/// Score elements in a fixed order, batch by batch, maintaining the running
/// solution. Used by UniformSample / ScanBest / ScanWorst.
TopKSolution run_ordered_scan(const std::vector<ElementId>& order, const QueryParams& params,
                              ScorerPlugin& plugin, const StopCondition& stop = {},
                              const QueryObserver& observer = {});

}  // namespace otk
