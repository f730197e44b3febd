#pragma once

#include "otk/bandit.hpp"

namespace otk {

/// True when a fully greedy root-to-leaf descent would land on a different
/// leaf than the leaf with the globally maximal expected gain. Ties are
/// broken by smallest node_id in both procedures, so the check never flaps.
bool tree_fallback_triggered(const QueryState& state);

/// Drop the tree and keep the current leaves as a flat partition of arms.
/// Only valid in Tree mode; mode becomes Flat.
void flatten(QueryState& state);

/// True when the projected STK-per-second slope of plain uniform sampling
/// exceeds the bandit's slope, using the dynamically measured scorer and
/// overhead latencies.
bool cluster_fallback_triggered(const QueryState& state);

/// Abandon clustering: merge and shuffle all remaining ids, and serve
/// further batches from that list with no histogram maintenance.
void fallback_to_sample(QueryState& state);

}  // namespace otk
