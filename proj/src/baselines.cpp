#include "otk/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "otk/rng.hpp"

namespace otk {

const char* to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::Ucb: return "ucb";
        case BaselineKind::ExplorationOnly: return "exploration-only";
        case BaselineKind::UniformSample: return "uniform-sample";
        case BaselineKind::ScanBest: return "scan-best";
        case BaselineKind::ScanWorst: return "scan-worst";
        case BaselineKind::SortedScan: return "sorted-scan";
    }
    return "?";
}

BaselineKind baseline_from_string(const std::string& name) {
    if (name == "ucb") return BaselineKind::Ucb;
    if (name == "exploration-only") return BaselineKind::ExplorationOnly;
    if (name == "uniform-sample") return BaselineKind::UniformSample;
    if (name == "scan-best") return BaselineKind::ScanBest;
    if (name == "scan-worst") return BaselineKind::ScanWorst;
    if (name == "sorted-scan") return BaselineKind::SortedScan;
    throw std::invalid_argument("unknown baseline: " + name);
}

int ucb_choose(QueryState& state) {
    if (state.policy != SelectionPolicy::Ucb)
        throw std::logic_error("ucb_choose: state was not created with the Ucb policy");
    return state.choose_leaf();
}

int exploration_only_choose(QueryState& state) {
    return state.descend_random();
}

std::vector<ElementId> uniform_sample_order(const std::vector<ElementId>& ids, std::uint64_t seed) {
    std::vector<ElementId> order = ids;
    Rng rng(seed);
    rng.shuffle(order);
    return order;
}

OracleOrders oracle_orders(const ScoreTable& table) {
    OracleOrders out;
    out.best.reserve(table.size());
    std::vector<const ScoredElement*> sorted;
    sorted.reserve(table.size());
    for (const auto& e : table) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const ScoredElement* a, const ScoredElement* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->id < b->id;
    });
    for (const auto* e : sorted) out.best.push_back(e->id);
    std::sort(sorted.begin(), sorted.end(), [](const ScoredElement* a, const ScoredElement* b) {
        if (a->score != b->score) return a->score < b->score;
        return a->id < b->id;
    });
    out.worst.reserve(table.size());
    for (const auto* e : sorted) out.worst.push_back(e->id);
    return out;
}

TopKSolution sorted_scan(const ScoreTable& table, std::size_t k) {
    TopKSolution solution(k);
    for (const auto& e : table) solution.insert(e);
    return solution;
}

TopKSolution run_ordered_scan(const std::vector<ElementId>& order, const QueryParams& params,
                              ScorerPlugin& plugin, const StopCondition& stop,
                              const QueryObserver& observer) {
    params.validate();
    TopKSolution solution(params.k);
    const auto clock = [] {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    };

    std::uint64_t t = 0;
    double elapsed = 0.0;
    double overhead = 0.0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
        if (stop.max_iterations && t >= *stop.max_iterations) break;
        if (stop.max_seconds && elapsed >= *stop.max_seconds) break;

        const std::size_t count = std::min(params.batch_size, order.size() - cursor);
        const double t0 = clock();
        const std::vector<ElementId> ids(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                         order.begin() + static_cast<std::ptrdiff_t>(cursor + count));
        const std::vector<Payload> payloads = plugin.fetch_batch(ids);
        if (payloads.size() != ids.size())
            throw std::runtime_error("scorer plugin: fetch_batch size mismatch");
        const std::vector<Score> scores = plugin.score_batch(payloads);
        const double t1 = clock();
        if (scores.size() != ids.size())
            throw std::runtime_error("scorer plugin: score_batch size mismatch");
        for (Score s : scores)
            if (!(s >= 0.0) || !std::isfinite(s))
                throw std::runtime_error("scorer plugin: score must be non-negative and finite");

        cursor += count;
        for (std::size_t i = 0; i < count; ++i) {
            solution.insert({ids[i], scores[i]});
            ++t;
        }
        const double t2 = clock();
        elapsed += t2 - t0;
        overhead += (t2 - t0) - (t1 - t0);
        if (observer.on_batch)
            observer.on_batch({t, elapsed, overhead, solution.stk_value(), "SCAN", solution});
    }
    return solution;
}

}  // namespace otk
