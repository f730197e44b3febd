#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otk/bandit.hpp"
#include "otk/baselines.hpp"
#include "otk/index.hpp"
#include "otk/metrics.hpp"
#include "otk/synthetic.hpp"

namespace otk {

/// Algorithms the harness can run: the primary bandit (with ablation
/// variants) plus all baseline strategies.
///   ours | ours-nofallback | ours-norebin | ours-nosubtract |
///   ucb | exploration-only | uniform-sample | scan-best | scan-worst |
///   sorted-scan
bool is_known_algorithm(const std::string& name);

struct ExperimentConfig {
    std::string algorithm = "ours";
    QueryParams params;
    std::size_t repetitions = 1;
    std::optional<std::uint64_t> max_iterations;
    std::optional<double> max_seconds;
    std::string scorer = "relu";   // scorer spec, see make_scorer()
    std::string cache_dir = ".";   // ground-truth score cache location
    double index_build_seconds = 0.0;  // reported in the summary

    // Replace the executor's monotonic clock with a fixed-tick counter so
    // latency-driven fallback decisions replay exactly. Timing columns then
    // carry synthetic values.
    bool deterministic_timing = false;
};

struct ExperimentResult {
    std::vector<MetricRow> rows;
    nlohmann::json summary;
};

/// Exact scores for the whole dataset, cached on disk keyed by a content
/// hash of (ids, values, scorer name). Scoring runs through the plugin in
/// large batches on a cache miss.
ScoreTable full_score_table(const Dataset& dataset, ScorerPlugin& plugin,
                            const std::string& scorer_name, const std::string& cache_dir);

/// Checkpoint grid used for metric rows and cross-run averaging: every 1% of
/// the horizon plus t in {k, 2k, 5k} and the horizon itself.
std::vector<std::uint64_t> checkpoint_grid(std::size_t horizon, std::size_t k);

/// Run `repetitions` seeded runs of one algorithm, collecting metric rows at
/// the checkpoint grid and a cross-run summary (mean and standard deviation
/// of STK and Precision@K per checkpoint).
ExperimentResult run_experiment(const Dataset& dataset, const Index& index,
                                const ExperimentConfig& config);

/// Write rows to `csv_path` and the summary next to it (.summary.json).
void write_experiment_outputs(const ExperimentResult& result, const std::string& csv_path);

}  // namespace otk
