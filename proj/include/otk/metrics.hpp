#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "otk/baselines.hpp"
#include "otk/core.hpp"

namespace otk {

/// One emitted measurement. Within a run, t is strictly increasing and stk
/// never decreases.
struct MetricRow {
    std::uint64_t run_id = 0;
    std::uint64_t t = 0;
    double elapsed_seconds = 0.0;
    double stk = 0.0;
    double precision_at_k = 0.0;
    std::string mode;
    double overhead_seconds = 0.0;

    bool operator==(const MetricRow&) const = default;
};

inline constexpr const char* kMetricCsvHeader =
    "run_id,t,elapsed_seconds,stk,precision_at_k,mode,overhead_seconds";

/// Doubles are written in shortest round-trip form, so parsing the emitted
/// CSV reproduces the rows exactly.
void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metric_csv(std::istream& in);

/// Exact top-k ids from a full score table, ties broken by ascending id.
std::set<ElementId> ground_truth_top_k(const ScoreTable& table, std::size_t k);

/// Fraction of the ground-truth top-k present in the solution.
double precision_at_k(const TopKSolution& solution, const std::set<ElementId>& ground_truth,
                      std::size_t k);

}  // namespace otk
