#include "otk/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <stdexcept>

#include "otk/scorers.hpp"

namespace otk {

namespace {

const char* kAlgorithms[] = {"ours",      "ours-nofallback",  "ours-norebin",
                             "ours-nosubtract", "ucb",        "exploration-only",
                             "uniform-sample",  "scan-best",  "scan-worst",
                             "sorted-scan"};

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t dataset_scorer_hash(const Dataset& dataset, const std::string& scorer_name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : dataset.elements) {
        h = fnv1a(e.id.data(), e.id.size(), h);
        h = fnv1a(&e.value, sizeof(e.value), h);
    }
    h = fnv1a(scorer_name.data(), scorer_name.size(), h);
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

bool is_known_algorithm(const std::string& name) {
    for (const char* a : kAlgorithms)
        if (name == a) return true;
    return false;
}

ScoreTable full_score_table(const Dataset& dataset, ScorerPlugin& plugin,
                            const std::string& scorer_name, const std::string& cache_dir) {
    const std::uint64_t hash = dataset_scorer_hash(dataset, scorer_name);
    const std::string cache_path = cache_dir + "/otk-gt-" + hash_hex(hash) + ".json";

    {
        std::ifstream in(cache_path, std::ios::binary);
        if (in) {
            nlohmann::json j;
            in >> j;
            if (j.value("version", 0) == 1 && j.value("hash", "") == hash_hex(hash) &&
                j.contains("scores") && j["scores"].is_array() &&
                j["scores"].size() == dataset.elements.size()) {
                ScoreTable table;
                table.reserve(dataset.elements.size());
                for (std::size_t i = 0; i < dataset.elements.size(); ++i)
                    table.push_back({dataset.elements[i].id, j["scores"][i].get<double>()});
                return table;
            }
        }
    }

    ScoreTable table;
    table.reserve(dataset.elements.size());
    constexpr std::size_t kChunk = 512;
    std::vector<ElementId> ids;
    for (std::size_t start = 0; start < dataset.elements.size(); start += kChunk) {
        const std::size_t end = std::min(start + kChunk, dataset.elements.size());
        ids.clear();
        for (std::size_t i = start; i < end; ++i) ids.push_back(dataset.elements[i].id);
        const auto payloads = plugin.fetch_batch(ids);
        const auto scores = plugin.score_batch(payloads);
        if (scores.size() != ids.size())
            throw std::runtime_error("full_score_table: scorer returned wrong batch size");
        for (std::size_t i = 0; i < ids.size(); ++i) table.push_back({ids[i], scores[i]});
    }

    nlohmann::ordered_json j;
    j["version"] = 1;
    j["hash"] = hash_hex(hash);
    j["scorer"] = scorer_name;
    nlohmann::ordered_json scores = nlohmann::ordered_json::array();
    for (const auto& e : table) scores.push_back(e.score);
    j["scores"] = std::move(scores);
    std::ofstream out(cache_path, std::ios::binary);
    if (out) out << j.dump();
    return table;
}

std::vector<std::uint64_t> checkpoint_grid(std::size_t horizon, std::size_t k) {
    std::set<std::uint64_t> points;
    const auto step = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(
                                                     std::ceil(static_cast<double>(horizon) / 100.0)));
    for (std::uint64_t t = step; t < horizon; t += step) points.insert(t);
    points.insert(horizon);
    for (const std::uint64_t t : {k, 2 * k, 5 * k})
        if (t >= 1 && t <= horizon) points.insert(t);
    return {points.begin(), points.end()};
}

namespace {

struct RunCollector {
    const std::vector<std::uint64_t>& grid;
    const std::set<ElementId>& ground_truth;
    std::size_t k;
    std::uint64_t run_id;
    std::vector<MetricRow>& rows;
    std::vector<double>& stk_at_cp;        // one slot per checkpoint
    std::vector<double>& precision_at_cp;
    std::size_t next_cp = 0;
    std::string last_mode = "TREE";

    void on_batch(const BatchEvent& ev) {
        last_mode = ev.mode;
        if (next_cp >= grid.size() || ev.t < grid[next_cp]) return;
        const double precision = precision_at_k(ev.solution, ground_truth, k);
        while (next_cp < grid.size() && ev.t >= grid[next_cp]) {
            stk_at_cp[next_cp] = ev.stk;
            precision_at_cp[next_cp] = precision;
            ++next_cp;
        }
        rows.push_back({run_id, ev.t, ev.elapsed_seconds, ev.stk, precision, ev.mode,
                        ev.overhead_seconds});
    }

    // stopped early: later checkpoints carry the final values
    void finish(double stk, double precision) {
        while (next_cp < grid.size()) {
            stk_at_cp[next_cp] = stk;
            precision_at_cp[next_cp] = precision;
            ++next_cp;
        }
    }
};

struct VariantSpec {
    SelectionPolicy policy = SelectionPolicy::EpsilonGreedy;
    bool fallback = true;
    bool rebin = true;
    bool subtract = true;
};

VariantSpec tree_variant(const std::string& algorithm) {
    VariantSpec v;
    if (algorithm == "ours") return v;
    if (algorithm == "ours-nofallback") {
        v.fallback = false;
        return v;
    }
    if (algorithm == "ours-norebin") {
        v.rebin = false;
        return v;
    }
    if (algorithm == "ours-nosubtract") {
        v.subtract = false;
        return v;
    }
    if (algorithm == "ucb") {
        v.policy = SelectionPolicy::Ucb;
        return v;
    }
    if (algorithm == "exploration-only") {
        v.policy = SelectionPolicy::RandomDescent;
        return v;
    }
    throw std::invalid_argument("not a tree algorithm: " + algorithm);
}

}  // namespace

ExperimentResult run_experiment(const Dataset& dataset, const Index& index,
                                const ExperimentConfig& config) {
    if (!is_known_algorithm(config.algorithm))
        throw std::invalid_argument("unknown algorithm: " + config.algorithm);
    if (config.repetitions == 0)
        throw std::invalid_argument("run_experiment: repetitions must be >= 1");
    config.params.validate();

    const std::size_t n = dataset.elements.size();
    const std::size_t k = config.params.k;
    const std::size_t horizon =
        config.max_iterations ? std::min<std::size_t>(n, *config.max_iterations) : n;
    const std::vector<std::uint64_t> grid = checkpoint_grid(horizon, k);

    const auto scorer = make_scorer(dataset, config.scorer);
    const ScoreTable table =
        full_score_table(dataset, *scorer, scorer_cache_name(config.scorer), config.cache_dir);
    const std::set<ElementId> ground_truth = ground_truth_top_k(table, k);
    std::vector<Score> all_scores;
    all_scores.reserve(table.size());
    for (const auto& e : table) all_scores.push_back(e.score);
    // descending-order sum, matching how a best-case scan accumulates
    const double optimal_stk = stk(std::move(all_scores), k);

    ExperimentResult result;
    nlohmann::json runs_summary = nlohmann::json::array();
    std::vector<std::vector<double>> stk_samples(config.repetitions,
                                                 std::vector<double>(grid.size(), 0.0));
    std::vector<std::vector<double>> precision_samples(config.repetitions,
                                                       std::vector<double>(grid.size(), 0.0));

    const StopCondition stop{config.max_iterations, config.max_seconds};
    const bool is_tree = config.algorithm.rfind("ours", 0) == 0 || config.algorithm == "ucb" ||
                         config.algorithm == "exploration-only";

    for (std::uint64_t run = 0; run < config.repetitions; ++run) {
        QueryParams params = config.params;
        params.seed = config.params.seed + run;

        RunCollector collector{grid,          ground_truth,
                               k,             run,
                               result.rows,   stk_samples[run],
                               precision_samples[run]};
        nlohmann::json transitions = nlohmann::json::array();
        QueryObserver observer;
        observer.on_batch = [&](const BatchEvent& ev) { collector.on_batch(ev); };
        observer.on_mode_change = [&](const ModeChangeEvent& ev) {
            transitions.push_back({{"t", ev.t},
                                   {"from", to_string(ev.from)},
                                   {"to", to_string(ev.to)},
                                   {"reason", ev.reason}});
        };

        double final_stk = 0.0;
        double final_precision = 0.0;
        std::uint64_t final_t = 0;

        if (config.algorithm == "sorted-scan") {
            const double t0 = now_seconds();
            const TopKSolution solution = sorted_scan(table, k);
            const double elapsed = now_seconds() - t0;
            final_stk = solution.stk_value();
            final_precision = precision_at_k(solution, ground_truth, k);
            final_t = std::min<std::uint64_t>(k, n);
            result.rows.push_back({run, final_t, elapsed, final_stk, final_precision, "SORTED",
                                   elapsed});
        } else if (is_tree) {
            const VariantSpec variant = tree_variant(config.algorithm);
            params.fallback_enabled = variant.fallback;
            params.rebin_enabled = variant.rebin;
            params.subtract_enabled = variant.subtract;
            QueryState state(index, params, variant.policy);
            if (config.deterministic_timing) {
                auto ticks = std::make_shared<double>(0.0);
                state.clock = [ticks] { return *ticks += 1e-6; };
            }
            const TopKSolution solution = run_query(state, *scorer, stop, observer);
            final_stk = solution.stk_value();
            final_precision = precision_at_k(solution, ground_truth, k);
            final_t = state.t;
        } else {
            std::vector<ElementId> order;
            if (config.algorithm == "uniform-sample") {
                order = uniform_sample_order(dataset.all_ids(), params.seed);
            } else {
                const OracleOrders orders = oracle_orders(table);
                order = config.algorithm == "scan-best" ? orders.best : orders.worst;
            }
            const TopKSolution solution =
                run_ordered_scan(order, params, *scorer, stop, observer);
            final_stk = solution.stk_value();
            final_precision = precision_at_k(solution, ground_truth, k);
            final_t = std::min<std::uint64_t>(horizon, order.size());
        }

        collector.finish(final_stk, final_precision);
        runs_summary.push_back({{"run_id", run},
                                {"seed", params.seed},
                                {"final_t", final_t},
                                {"final_stk", final_stk},
                                {"final_precision", final_precision},
                                {"mode_transitions", transitions}});
    }

    nlohmann::json checkpoints = nlohmann::json::array();
    for (std::size_t c = 0; c < grid.size(); ++c) {
        double stk_sum = 0.0, stk_sq = 0.0, p_sum = 0.0, p_sq = 0.0;
        for (std::size_t run = 0; run < config.repetitions; ++run) {
            stk_sum += stk_samples[run][c];
            stk_sq += stk_samples[run][c] * stk_samples[run][c];
            p_sum += precision_samples[run][c];
            p_sq += precision_samples[run][c] * precision_samples[run][c];
        }
        const auto r = static_cast<double>(config.repetitions);
        const double stk_mean = stk_sum / r;
        const double p_mean = p_sum / r;
        const double stk_std = std::sqrt(std::max(0.0, stk_sq / r - stk_mean * stk_mean));
        const double p_std = std::sqrt(std::max(0.0, p_sq / r - p_mean * p_mean));
        checkpoints.push_back({{"t", grid[c]},
                               {"stk_mean", stk_mean},
                               {"stk_std", stk_std},
                               {"precision_mean", p_mean},
                               {"precision_std", p_std}});
    }

    result.summary = {{"algorithm", config.algorithm},
                      {"n", n},
                      {"k", k},
                      {"repetitions", config.repetitions},
                      {"scorer", scorer_cache_name(config.scorer)},
                      {"optimal_stk", optimal_stk},
                      {"index_build_seconds", config.index_build_seconds},
                      {"checkpoints", checkpoints},
                      {"runs", runs_summary}};
    return result;
}

void write_experiment_outputs(const ExperimentResult& result, const std::string& csv_path) {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot open " + csv_path);
    write_metric_csv(csv, result.rows);
    if (!csv) throw std::runtime_error("write failed for " + csv_path);

    std::string summary_path = csv_path;
    const auto pos = summary_path.rfind(".csv");
    if (pos != std::string::npos && pos == summary_path.size() - 4)
        summary_path.erase(pos);
    summary_path += ".summary.json";
    std::ofstream summary(summary_path, std::ios::binary);
    if (!summary) throw std::runtime_error("cannot open " + summary_path);
    summary << result.summary.dump(2) << '\n';
}

}  // namespace otk
