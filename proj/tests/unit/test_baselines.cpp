#include <doctest.h>

#include <map>
#include <set>

#include "otk/baselines.hpp"

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

Index finish(IndexNode root) {
    Index idx;
    idx.root = std::move(root);
    const std::function<void(const IndexNode&)> walk = [&](const IndexNode& n) {
        if (n.is_leaf()) {
            ++idx.leaf_count;
            idx.dataset_size += n.elements.size();
            return;
        }
        for (const auto& c : n.children) walk(c);
    };
    walk(idx.root);
    return idx;
}

QueryParams params_k2() {
    QueryParams p;
    p.k = 2;
    p.bucket_count = 4;
    p.initial_range = 10.0;
    p.seed = 12;
    return p;
}

}  // namespace

TEST_CASE("ucb descent prefers unvisited children, then the bonus") {
    IndexNode root;
    root.node_id = "node-root";
    root.children.push_back(leaf("leaf-a", {"a1", "a2"}));
    root.children.push_back(leaf("leaf-b", {"b1", "b2"}));
    QueryState state(finish(std::move(root)), params_k2(), SelectionPolicy::Ucb);
    const int a = state.find_node("leaf-a");
    const int b = state.find_node("leaf-b");

    SUBCASE("unvisited child goes first") {
        state.node(a).visits = 5;
        state.node(a).gain_sum = 5.0;
        for (int i = 0; i < 5; ++i) CHECK(ucb_choose(state) == b);
    }

    SUBCASE("large bonus on a rarely pulled arm beats a higher mean") {
        state.node(a).visits = 100;
        state.node(a).gain_sum = 100.0;  // mean 1.0
        state.node(b).visits = 1;
        state.node(b).gain_sum = 0.5;  // mean 0.5, bonus ~ 3.04
        CHECK(ucb_choose(state) == b);
    }

    SUBCASE("single child is simply taken") {
        state.node(a).visits = 1;
        state.node(b).cursor = 2;
        state.prune_empty(b);
        CHECK(ucb_choose(state) == a);
    }
}

TEST_CASE("ucb runs update per-node statistics with marginal gains") {
    IndexNode root;
    root.node_id = "node-root";
    root.children.push_back(leaf("leaf-a", {"a1"}));
    root.children.push_back(leaf("leaf-b", {"b1"}));
    QueryState state(finish(std::move(root)), params_k2(), SelectionPolicy::Ucb);
    MapScorer scorer;
    scorer.table = {{"a1", 4.0}, {"b1", 6.0}};
    while (!state.exhausted()) state.step_batch(scorer);

    CHECK(state.node(state.find_node("node-root")).visits == 2);
    CHECK(state.node(state.find_node("node-root")).gain_sum == doctest::Approx(10.0));
    CHECK(state.solution.stk_value() == 10.0);
}

TEST_CASE("exploration-only descent is uniform per layer") {
    IndexNode n1;
    n1.node_id = "node-1";
    n1.children.push_back(leaf("leaf-a", {"a"}));
    n1.children.push_back(leaf("leaf-b", {"b"}));
    IndexNode n2;
    n2.node_id = "node-2";
    n2.children.push_back(leaf("leaf-c", {"c"}));
    n2.children.push_back(leaf("leaf-d", {"d"}));

    SUBCASE("balanced tree: every leaf near 1/4") {
        IndexNode root;
        root.node_id = "node-root";
        root.children.push_back(n1);
        root.children.push_back(n2);
        QueryState state(finish(std::move(root)), params_k2(), SelectionPolicy::RandomDescent);
        std::map<std::string, int> counts;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i)
            ++counts[state.node(exploration_only_choose(state)).node_id];
        for (const auto& [id, count] : counts) {
            CHECK(count > 2500 - 130);  // 3 sigma for binomial(1e4, 1/4)
            CHECK(count < 2500 + 130);
        }
    }

    SUBCASE("unbalanced tree skews toward the shallow leaf") {
        IndexNode root;
        root.node_id = "node-root";
        root.children.push_back(leaf("leaf-s", {"s"}));
        root.children.push_back(n1);
        QueryState state(finish(std::move(root)), params_k2(), SelectionPolicy::RandomDescent);
        int shallow = 0;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i)
            if (state.node(exploration_only_choose(state)).node_id == "leaf-s") ++shallow;
        CHECK(shallow > 5000 - 150);  // 3 sigma for binomial(1e4, 1/2)
        CHECK(shallow < 5000 + 150);
    }
}

TEST_CASE("uniform_sample_order is a seeded permutation") {
    std::vector<ElementId> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("e" + std::to_string(i));

    const auto a = uniform_sample_order(ids, 5);
    const auto b = uniform_sample_order(ids, 5);
    const auto c = uniform_sample_order(ids, 6);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a != ids);  // virtually certain for 100 elements
    CHECK(std::set<ElementId>(a.begin(), a.end()).size() == ids.size());
}

TEST_CASE("oracle orders sort by score with id tie-breaks") {
    const ScoreTable table{{"a", 1.0}, {"b", 3.0}, {"c", 2.0}};
    const OracleOrders orders = oracle_orders(table);
    CHECK(orders.best == std::vector<ElementId>{"b", "c", "a"});
    CHECK(orders.worst == std::vector<ElementId>{"a", "c", "b"});

    SUBCASE("ties break by ascending id in both orders") {
        const ScoreTable tied{{"z", 1.0}, {"y", 1.0}, {"x", 2.0}};
        const OracleOrders t = oracle_orders(tied);
        CHECK(t.best == std::vector<ElementId>{"x", "y", "z"});
        CHECK(t.worst == std::vector<ElementId>{"y", "z", "x"});
    }
}

TEST_CASE("scan-best is optimal at t=k, scan-worst only at t=n") {
    ScoreTable table;
    MapScorer scorer;
    for (int i = 0; i < 20; ++i) {
        const std::string id = "e" + std::to_string(i);
        table.push_back({id, static_cast<double>(i)});
        scorer.table[id] = static_cast<double>(i);
    }
    const OracleOrders orders = oracle_orders(table);
    const double optimal = stk({19, 18, 17}, 3);

    QueryParams params;
    params.k = 3;

    std::vector<double> best_curve;
    QueryObserver best_obs;
    best_obs.on_batch = [&](const BatchEvent& ev) { best_curve.push_back(ev.stk); };
    run_ordered_scan(orders.best, params, scorer, {}, best_obs);
    CHECK(best_curve[2] == optimal);  // t = k
    CHECK(best_curve.back() == optimal);

    std::vector<double> worst_curve;
    QueryObserver worst_obs;
    worst_obs.on_batch = [&](const BatchEvent& ev) { worst_curve.push_back(ev.stk); };
    run_ordered_scan(orders.worst, params, scorer, {}, worst_obs);
    CHECK(worst_curve[worst_curve.size() - 2] < optimal);
    CHECK(worst_curve.back() == optimal);

    SUBCASE("uniform sampling sits between the two scan bounds on average") {
        double uniform_sum_at_5 = 0.0;
        const int runs = 40;
        for (int run = 0; run < runs; ++run) {
            const auto order = uniform_sample_order(orders.best, 100 + run);
            std::vector<double> curve;
            QueryObserver obs;
            obs.on_batch = [&](const BatchEvent& ev) { curve.push_back(ev.stk); };
            run_ordered_scan(order, params, scorer, {}, obs);
            CHECK(curve.back() == optimal);
            uniform_sum_at_5 += curve[4];
        }
        const double uniform_mean_at_5 = uniform_sum_at_5 / runs;
        CHECK(uniform_mean_at_5 <= best_curve[4]);
        CHECK(uniform_mean_at_5 >= worst_curve[4]);
    }
}

TEST_CASE("sorted_scan returns the exact top-k without scoring") {
    ScoreTable table{{"a", 5.0}, {"b", 9.0}, {"c", 7.0}, {"d", 1.0}};

    const TopKSolution top2 = sorted_scan(table, 2);
    CHECK(top2.stk_value() == 16.0);
    CHECK(top2.size() == 2);

    SUBCASE("empty table gives an empty solution") {
        const TopKSolution empty = sorted_scan({}, 3);
        CHECK(empty.size() == 0);
        CHECK(empty.stk_value() == 0.0);
    }

    SUBCASE("k at least n keeps the whole dataset") {
        const TopKSolution all = sorted_scan(table, 10);
        CHECK(all.size() == 4);
        CHECK(all.stk_value() == 22.0);
    }
}

TEST_CASE("baseline name round-trip") {
    for (const BaselineKind kind :
         {BaselineKind::Ucb, BaselineKind::ExplorationOnly, BaselineKind::UniformSample,
          BaselineKind::ScanBest, BaselineKind::ScanWorst, BaselineKind::SortedScan})
        CHECK(baseline_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(baseline_from_string("bogus"), std::invalid_argument);
}
