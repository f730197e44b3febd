#include <doctest.h>

#include <map>
#include <set>

#include "otk/fallback.hpp"
#include "otk/synthetic.hpp"
#include "otk/scorers.hpp"

using namespace otk;

namespace {

struct MapScorer : ScorerPlugin {
    std::map<std::string, double> table;
    std::vector<Payload> fetch_batch(const std::vector<ElementId>& ids) override {
        std::vector<Payload> out;
        for (const auto& id : ids) out.emplace_back(table.at(id));
        return out;
    }
    std::vector<Score> score_batch(const std::vector<Payload>& payloads) override {
        std::vector<Score> out;
        for (const auto& p : payloads) out.push_back(p.get<double>());
        return out;
    }
};

IndexNode leaf(const std::string& id, std::vector<ElementId> elements) {
    IndexNode n;
    n.node_id = id;
    n.elements = std::move(elements);
    n.centroid = {0.0};
    return n;
}

Index count_index(std::size_t leaves, std::size_t per_leaf) {
    IndexNode root;
    root.node_id = "node-root";
    std::size_t next = 0;
    for (std::size_t l = 0; l < leaves; ++l) {
        std::vector<ElementId> ids;
        for (std::size_t i = 0; i < per_leaf; ++i) ids.push_back("e" + std::to_string(next++));
        root.children.push_back(leaf("leaf-" + std::to_string(l), std::move(ids)));
    }
    Index idx;
    idx.root = std::move(root);
    idx.leaf_count = leaves;
    idx.dataset_size = leaves * per_leaf;
    return idx;
}

// root: (node-1: leaf-a leaf-b) (node-2: leaf-c leaf-d)
Index misleading_index() {
    IndexNode n1;
    n1.node_id = "node-1";
    n1.children.push_back(leaf("leaf-a", {"a1", "a2"}));
    n1.children.push_back(leaf("leaf-b", {"b1", "b2"}));
    IndexNode n2;
    n2.node_id = "node-2";
    n2.children.push_back(leaf("leaf-c", {"c1", "c2"}));
    n2.children.push_back(leaf("leaf-d", {"d1", "d2"}));
    IndexNode root;
    root.node_id = "node-root";
    root.children.push_back(std::move(n1));
    root.children.push_back(std::move(n2));
    Index idx;
    idx.root = std::move(root);
    idx.leaf_count = 4;
    idx.dataset_size = 8;
    return idx;
}

QueryParams params_b4() {
    QueryParams p;
    p.k = 2;
    p.bucket_count = 4;
    p.initial_range = 10.0;
    p.seed = 5;
    return p;
}

}  // namespace

TEST_CASE("fallback checks run after warmup, then at the check frequency") {
    FallbackSchedule schedule;
    schedule.check_fraction = 0.01;
    std::vector<std::uint64_t> hits;
    for (std::uint64_t t = 0; t <= 1000; ++t) {
        if (schedule.due(t, 1000)) {
            schedule.mark(t);
            hits.push_back(t);
        }
    }
    REQUIRE(hits.size() == 71);
    CHECK(hits[0] == 300);
    CHECK(hits[1] == 310);
    CHECK(hits[2] == 320);
    CHECK(hits.back() == 1000);
}

TEST_CASE("tree fallback detects a misleading hierarchy") {
    QueryState state(misleading_index(), params_b4());

    SUBCASE("identical sketches everywhere: no trigger") {
        CHECK_FALSE(tree_fallback_triggered(state));
        for (auto& n : state.nodes) n.sketch.record(5.0);
        CHECK_FALSE(tree_fallback_triggered(state));
    }

    SUBCASE("best leaf hidden behind a weak subtree: trigger") {
        // leaf-a is the greedy arm but its subtree average loses to node-2
        state.node(state.find_node("leaf-a")).sketch.record(9.0);
        state.node(state.find_node("leaf-b")).sketch.record(1.0);
        state.node(state.find_node("node-1")).sketch.record(9.0);
        state.node(state.find_node("node-1")).sketch.record(1.0);
        state.node(state.find_node("leaf-c")).sketch.record(6.0);
        state.node(state.find_node("leaf-d")).sketch.record(6.0);
        state.node(state.find_node("node-2")).sketch.record(6.0);
        state.node(state.find_node("node-2")).sketch.record(6.0);
        CHECK(tree_fallback_triggered(state));
    }

    SUBCASE("greedy arm on the greedy path: no trigger") {
        state.node(state.find_node("leaf-a")).sketch.record(9.0);
        state.node(state.find_node("node-1")).sketch.record(9.0);
        CHECK_FALSE(tree_fallback_triggered(state));
    }
}

TEST_CASE("tree fallback on a single leaf never triggers") {
    Index idx;
    idx.root = leaf("leaf-only", {"x"});
    idx.leaf_count = 1;
    idx.dataset_size = 1;
    QueryState state(idx, params_b4());
    CHECK_FALSE(tree_fallback_triggered(state));
}

TEST_CASE("flatten keeps the leaves and their state") {
    QueryState state(misleading_index(), params_b4());
    state.node(state.find_node("leaf-a")).sketch.record(3.0);
    const double mass_before = state.node(state.find_node("leaf-a")).sketch.total_mass();
    const std::size_t remaining_before = state.remaining_total();

    flatten(state);
    CHECK(state.mode == QueryMode::Flat);
    CHECK(state.arms.size() == 4);
    CHECK(state.remaining_total() == remaining_before);
    CHECK(state.node(state.find_node("leaf-a")).sketch.total_mass() == mass_before);
    CHECK_THROWS_AS(flatten(state), std::logic_error);

    SUBCASE("flat mode still drains every element") {
        MapScorer scorer;
        for (const auto& n : state.nodes)
            for (const auto& id : n.draw_order) scorer.table[id] = 1.0;
        while (!state.exhausted()) state.step_batch(scorer);
        CHECK(state.t == 8);
    }
}

TEST_CASE("cluster fallback compares slope estimates") {
    QueryState state(count_index(2, 2), params_b4());
    state.latency_initialized = true;

    SUBCASE("identical arms with real overhead: sampling wins") {
        for (int l : state.live_leaves()) state.node(l).sketch.record(5.0);
        state.scorer_latency_ema = 1e-3;
        state.overhead_latency_ema = 1e-3;
        CHECK(cluster_fallback_triggered(state));
    }

    SUBCASE("one dominant arm with negligible overhead: bandit wins") {
        state.node(state.live_leaves()[0]).sketch.record(9.9);
        state.scorer_latency_ema = 1e-3;
        state.overhead_latency_ema = 1e-9;
        CHECK_FALSE(cluster_fallback_triggered(state));
    }

    SUBCASE("all gains zero: strict inequality fails, no trigger") {
        state.scorer_latency_ema = 1e-3;
        state.overhead_latency_ema = 1e-3;
        CHECK_FALSE(cluster_fallback_triggered(state));
    }
}

TEST_CASE("fallback_to_sample merges, shuffles and finishes the scan") {
    QueryState state(count_index(3, 2), params_b4());
    MapScorer scorer;
    for (const auto& n : state.nodes)
        for (const auto& id : n.draw_order) scorer.table[id] = 1.0;

    // consume one batch first so some ids are already scored
    state.step_batch(scorer);
    const std::uint64_t scored = state.t;
    std::set<ElementId> scored_ids;
    for (const auto& n : state.nodes)
        for (std::size_t i = 0; i < n.cursor; ++i) scored_ids.insert(n.draw_order[i]);

    fallback_to_sample(state);
    CHECK(state.mode == QueryMode::Sample);
    CHECK(state.sample_queue.size() == 6 - scored);

    std::set<ElementId> queued(state.sample_queue.begin(), state.sample_queue.end());
    CHECK(queued.size() == state.sample_queue.size());  // unique
    for (const auto& id : scored_ids) CHECK(queued.count(id) == 0);

    while (!state.exhausted()) state.step_batch(scorer);
    CHECK(state.t == 6);  // exhaustion at exactly n

    CHECK_THROWS_AS(fallback_to_sample(state), std::logic_error);
    CHECK_THROWS_AS(flatten(state), std::logic_error);
}

TEST_CASE("run_query falls back to sampling when clusters carry no signal") {
    // two identically distributed clusters; a fake clock makes the per-batch
    // overhead dominate the scorer latency, so the sampling slope must win
    const Dataset dataset = gen_no_signal(2, 200, 8);
    const Index index = build_index(dataset.vector_entries(), 2, std::nullopt, 8);
    BuiltinScorer scorer(dataset, "relu",
                         [](const Payload& p) { return std::max(0.0, p.get<double>()); });

    QueryParams params;
    params.k = 10;
    params.seed = 3;
    QueryState state(index, params);
    double fake_time = 0.0;
    state.clock = [&fake_time] { return fake_time += 1e-3; };

    std::vector<ModeChangeEvent> events;
    QueryObserver observer;
    observer.on_mode_change = [&](const ModeChangeEvent& ev) { events.push_back(ev); };
    run_query(state, scorer, {}, observer);

    CHECK(state.t == dataset.elements.size());
    REQUIRE(!events.empty());
    CHECK(events.back().to == QueryMode::Sample);
    // transitions only ever move forward
    for (std::size_t i = 1; i < events.size(); ++i)
        CHECK(static_cast<int>(events[i].from) >= static_cast<int>(events[i - 1].to));
}
