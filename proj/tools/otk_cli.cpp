#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "otk/experiment.hpp"
#include "otk/histogram.hpp"
#include "otk/index.hpp"
#include "otk/oracle.hpp"
#include "otk/scorers.hpp"
#include "otk/synthetic.hpp"

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string dirname_of(const std::string& path) {
    const auto pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

int cmd_gen_synthetic(std::size_t clusters, std::size_t per_cluster, std::uint64_t seed,
                      const std::string& out) {
    otk::SyntheticSpec spec;
    spec.cluster_count = clusters;
    spec.samples_per_cluster = per_cluster;
    spec.seed = seed;
    const otk::Dataset dataset = otk::gen_synthetic(spec);
    otk::save_dataset(dataset, out);
    std::cout << "wrote " << dataset.elements.size() << " elements to " << out << "\n";
    return 0;
}

int cmd_index_build(const std::string& data_path, std::size_t leaves,
                    std::optional<std::size_t> subsample, std::uint64_t seed,
                    const std::string& out) {
    const otk::Dataset dataset = otk::load_dataset(data_path);
    const double t0 = now_seconds();
    const otk::Index index = otk::build_index(dataset.vector_entries(), leaves, subsample, seed);
    const double build_seconds = now_seconds() - t0;
    otk::save_index(index, out);
    std::cout << "built index with " << index.leaf_count << " leaves over "
              << index.dataset_size << " elements in " << build_seconds << " s; wrote " << out
              << "\n";
    return 0;
}

int cmd_query_run(const otk::ExperimentConfig& config, const std::string& data_path,
                  const std::string& index_path, const std::string& out) {
    const otk::Dataset dataset = otk::load_dataset(data_path);

    otk::Index index;
    otk::ExperimentConfig cfg = config;
    if (config.algorithm.rfind("ours", 0) == 0 || config.algorithm == "ucb" ||
        config.algorithm == "exploration-only") {
        if (index_path.empty())
            throw std::runtime_error("--index is required for tree algorithms (run `otk index build` first)");
        index = otk::load_index(index_path);
        if (index.dataset_size != dataset.elements.size())
            throw std::runtime_error("index covers " + std::to_string(index.dataset_size) +
                                     " elements but dataset has " +
                                     std::to_string(dataset.elements.size()));
    }
    cfg.cache_dir = dirname_of(out);

    const otk::ExperimentResult result = otk::run_experiment(dataset, index, cfg);
    otk::write_experiment_outputs(result, out);
    std::cout << "wrote " << result.rows.size() << " metric rows to " << out << "\n";
    std::cout << "optimal stk: " << result.summary["optimal_stk"] << "\n";
    return 0;
}

int cmd_verify(std::size_t trials, std::size_t seeds, const std::string& out) {
    nlohmann::ordered_json report;
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    bool all_pass = true;

    {
        const double t0 = now_seconds();
        const otk::PropertyReport r = otk::check_stk_properties(3, 5, {1, 2, 3});
        checks.push_back({{"name", "stk-monotone-dr-exhaustive"},
                          {"pass", r.pass},
                          {"checks", r.checks},
                          {"counterexample", r.counterexample},
                          {"seconds", now_seconds() - t0}});
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "PASS" : "FAIL") << " stk-monotone-dr-exhaustive (" << r.checks
                  << " checks)\n";
    }

    {
        // budget-value monotonicity and diminishing returns on coupled
        // Monte Carlo estimates over all budgets <= 4 for 3 arms
        const double t0 = now_seconds();
        bool pass = true;
        std::string counterexample;
        std::uint64_t total_checks = 0;
        for (std::uint64_t seed = 1; seed <= seeds && pass; ++seed) {
            otk::Rng rng(seed * 977);
            std::vector<otk::DiscreteArm> arms;
            for (int l = 0; l < 3; ++l) {
                otk::DiscreteArm arm;
                double total = 0.0;
                for (int v = 0; v <= 5; ++v) {
                    arm.outcomes.push_back(v);
                    const double w = rng.uniform01() + 1e-3;
                    arm.probabilities.push_back(w);
                    total += w;
                }
                for (auto& p : arm.probabilities) p /= total;
                // renormalize exactly
                double sum = 0.0;
                for (double p : arm.probabilities) sum += p;
                arm.probabilities.back() += 1.0 - sum;
                arms.push_back(arm);
            }
            for (std::size_t k = 1; k <= 3 && pass; ++k) {
                std::vector<otk::BsEstimate> cache(6 * 6 * 6);
                const auto est = [&](std::uint64_t a, std::uint64_t b, std::uint64_t c) {
                    const std::size_t key = (a * 6 + b) * 6 + c;
                    if (cache[key].mean == 0.0 && cache[key].std_error == 0.0 && (a + b + c) > 0)
                        cache[key] = otk::bs_estimate(arms, {a, b, c}, k, trials, seed);
                    return cache[key];
                };
                const auto pooled2 = [](const otk::BsEstimate& x, const otk::BsEstimate& y) {
                    return x.std_error * x.std_error + y.std_error * y.std_error;
                };
                for (std::uint64_t a = 0; a <= 4 && pass; ++a)
                    for (std::uint64_t b = 0; b <= 4 && pass; ++b)
                        for (std::uint64_t c = 0; c <= 4 && pass; ++c) {
                            const otk::BsEstimate base = est(a, b, c);
                            const otk::BsEstimate plus[3] = {est(a + 1, b, c), est(a, b + 1, c),
                                                             est(a, b, c + 1)};
                            for (int i = 0; i < 3; ++i) {
                                ++total_checks;
                                const double pooled = std::sqrt(pooled2(plus[i], base));
                                if (plus[i].mean - base.mean < -3.0 * pooled - 1e-9) {
                                    pass = false;
                                    counterexample = "monotonicity at budget (" +
                                                     std::to_string(a) + "," + std::to_string(b) +
                                                     "," + std::to_string(c) + ") coord " +
                                                     std::to_string(i);
                                }
                            }
                            // diminishing returns against the top of the lattice
                            const otk::BsEstimate y = est(4, 4, 4);
                            const otk::BsEstimate yp = est(5, 4, 4);
                            ++total_checks;
                            const double lhs = plus[0].mean - base.mean;
                            const double rhs = yp.mean - y.mean;
                            const double se =
                                std::sqrt(pooled2(plus[0], base) + pooled2(yp, y));
                            if (lhs - rhs < -3.0 * se - 1e-9) {
                                pass = false;
                                counterexample = "diminishing returns at budget (" +
                                                 std::to_string(a) + "," + std::to_string(b) +
                                                 "," + std::to_string(c) + ")";
                            }
                        }
            }
        }
        checks.push_back({{"name", "budget-value-monotone-dr-coupled"},
                          {"pass", pass},
                          {"checks", total_checks},
                          {"counterexample", counterexample},
                          {"seconds", now_seconds() - t0}});
        all_pass = all_pass && pass;
        std::cout << (pass ? "PASS" : "FAIL") << " budget-value-monotone-dr-coupled ("
                  << total_checks << " checks)\n";
    }

    {
        // histogram gain estimator against a Monte Carlo oracle
        const double t0 = now_seconds();
        bool pass = true;
        std::string counterexample;
        std::uint64_t total_checks = 0;
        otk::Rng rng(4242);
        for (std::size_t round = 0; round < std::max<std::size_t>(1, seeds * 2) && pass; ++round) {
            otk::HistogramSketch h(2 + rng.uniform_int(8), 0.5 + rng.uniform(0.0, 15.0));
            const int records = 1 + static_cast<int>(rng.uniform_int(200));
            for (int i = 0; i < records; ++i) h.record(rng.uniform(0.0, h.max_edge()));
            for (int j = 0; j < 3 && pass; ++j) {
                const double theta = rng.uniform(0.0, h.max_edge() * 1.1);
                double sum = 0.0, sum_sq = 0.0;
                const std::size_t draws = std::max<std::size_t>(trials * 20, 10000);
                for (std::size_t i = 0; i < draws; ++i) {
                    double pick = rng.uniform01() * h.total_mass();
                    std::size_t bin = 0;
                    for (; bin + 1 < h.mass().size(); ++bin) {
                        if (pick < h.mass()[bin]) break;
                        pick -= h.mass()[bin];
                    }
                    const double x = rng.uniform(h.edges()[bin], h.edges()[bin + 1]);
                    const double v = std::max(x - theta, 0.0);
                    sum += v;
                    sum_sq += v * v;
                }
                const auto dn = static_cast<double>(draws);
                const double mean = sum / dn;
                const double se =
                    std::sqrt(std::max(0.0, (sum_sq - sum * sum / dn) / (dn - 1.0)) / dn);
                ++total_checks;
                if (std::abs(h.expected_gain(theta) - mean) > 3.0 * se + 1e-9) {
                    pass = false;
                    counterexample = "sketch " + std::to_string(round);
                }
            }
        }
        checks.push_back({{"name", "gain-estimator-vs-monte-carlo"},
                          {"pass", pass},
                          {"checks", total_checks},
                          {"counterexample", counterexample},
                          {"seconds", now_seconds() - t0}});
        all_pass = all_pass && pass;
        std::cout << (pass ? "PASS" : "FAIL") << " gain-estimator-vs-monte-carlo ("
                  << total_checks << " checks)\n";
    }

    report["all_pass"] = all_pass;
    report["checks"] = checks;
    if (!out.empty()) {
        std::ofstream f(out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + out);
        f << report.dump(2) << '\n';
        std::cout << "wrote report to " << out << "\n";
    } else {
        std::cout << report.dump(2) << "\n";
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Approximate opaque top-k queries over a hierarchical cluster index"};
    app.require_subcommand(1);

    // gen synthetic
    auto* gen = app.add_subcommand("gen", "generate datasets");
    gen->require_subcommand(1);
    auto* gen_synth = gen->add_subcommand("synthetic", "clustered normal data");
    std::size_t clusters = 20;
    std::size_t per_cluster = 2500;
    std::uint64_t gen_seed = 0;
    std::string gen_out = "dataset.json";
    gen_synth->add_option("--clusters", clusters, "number of clusters");
    gen_synth->add_option("--per-cluster", per_cluster, "samples per cluster");
    gen_synth->add_option("--seed", gen_seed, "generator seed");
    gen_synth->add_option("--out", gen_out, "output dataset path")->required();

    // index build
    auto* index_cmd = app.add_subcommand("index", "index operations");
    index_cmd->require_subcommand(1);
    auto* index_build_cmd = index_cmd->add_subcommand("build", "build the cluster index");
    std::string ib_data;
    std::size_t ib_leaves = 20;
    std::size_t ib_subsample = 0;
    std::uint64_t ib_seed = 0;
    std::string ib_out = "index.json";
    index_build_cmd->add_option("--data", ib_data, "dataset path")->required();
    index_build_cmd->add_option("--leaves", ib_leaves, "number of leaf clusters");
    index_build_cmd->add_option("--subsample", ib_subsample, "clustering subsample size (0 = full)");
    index_build_cmd->add_option("--seed", ib_seed, "clustering seed");
    index_build_cmd->add_option("--out", ib_out, "output index path")->required();

    // query run
    auto* query = app.add_subcommand("query", "query operations");
    query->require_subcommand(1);
    auto* query_run = query->add_subcommand("run", "run an anytime top-k experiment");
    otk::ExperimentConfig config;
    std::string qr_data;
    std::string qr_index;
    std::string qr_out = "results.csv";
    std::uint64_t qr_max_iters = 0;
    double qr_max_seconds = 0.0;
    query_run->add_option("--data", qr_data, "dataset path")->required();
    query_run->add_option("--index", qr_index, "index path (tree algorithms)");
    query_run->add_option("--algorithm", config.algorithm,
                          "ours | ours-nofallback | ours-norebin | ours-nosubtract | ucb | "
                          "exploration-only | uniform-sample | scan-best | scan-worst | sorted-scan");
    query_run->add_option("--k", config.params.k, "result cardinality");
    query_run->add_option("--bucket-count", config.params.bucket_count, "histogram buckets (B)");
    query_run->add_option("--alpha", config.params.initial_range, "initial histogram range");
    query_run->add_option("--beta", config.params.range_growth, "range overestimation factor");
    query_run->add_option("--fallback-freq", config.params.fallback_frequency,
                          "fallback check frequency (fraction of n)");
    query_run->add_option("--batch-size", config.params.batch_size, "scoring batch size");
    query_run->add_option("--seed", config.params.seed, "base query seed");
    query_run->add_option("--reps", config.repetitions, "number of repetitions");
    query_run->add_option("--max-iters", qr_max_iters, "iteration limit (0 = exhaustion)");
    query_run->add_option("--max-seconds", qr_max_seconds, "wall-clock limit (0 = none)");
    query_run->add_option("--scorer", config.scorer,
                          "relu | identity | noop | constant:<v> | cmd:<command>");
    query_run->add_option("--out", qr_out, "output CSV path");
    query_run->add_flag("--deterministic-timing", config.deterministic_timing,
                        "drive fallback decisions from a fixed-tick clock for exact replays");

    // verify
    auto* verify = app.add_subcommand("verify", "run the theory property checks");
    std::size_t v_trials = 10000;
    std::size_t v_seeds = 5;
    std::string v_out;
    verify->add_option("--trials", v_trials, "Monte Carlo trials per estimate");
    verify->add_option("--seeds", v_seeds, "random instances to test");
    verify->add_option("--out", v_out, "write the JSON report here (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_synth->parsed()) return cmd_gen_synthetic(clusters, per_cluster, gen_seed, gen_out);
        if (index_build_cmd->parsed()) {
            std::optional<std::size_t> subsample;
            if (ib_subsample > 0) subsample = ib_subsample;
            return cmd_index_build(ib_data, ib_leaves, subsample, ib_seed, ib_out);
        }
        if (query_run->parsed()) {
            if (qr_max_iters > 0) config.max_iterations = qr_max_iters;
            if (qr_max_seconds > 0) config.max_seconds = qr_max_seconds;
            return cmd_query_run(config, qr_data, qr_index, qr_out);
        }
        if (verify->parsed()) return cmd_verify(v_trials, v_seeds, v_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
