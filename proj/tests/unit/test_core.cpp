#include <doctest.h>

#include <cmath>

#include "otk/core.hpp"
#include "otk/rng.hpp"

using namespace otk;

TEST_CASE("stk sums the k largest scores") {
    CHECK(stk({}, 5) == 0.0);
    CHECK(stk({4, 2, 7}, 2) == 11.0);
    CHECK(stk({3, 3, 3}, 5) == 9.0);
    CHECK(stk({1, 2, 3, 4}, 1) == 4.0);
}

TEST_CASE("kth_score is 0 until the solution is full") {
    TopKSolution s(2);
    s.insert({"a", 5});
    CHECK(s.kth_score() == 0.0);
    s.insert({"b", 3});
    CHECK(s.kth_score() == 3.0);

    TopKSolution t(3);
    t.insert({"a", 5});
    t.insert({"b", 5});
    t.insert({"c", 1});
    CHECK(t.kth_score() == 1.0);
}

TEST_CASE("insert gains and evictions") {
    TopKSolution s(2);

    auto r = s.insert({"a", 5});
    CHECK(r.gain == 5.0);
    CHECK(!r.evicted);

    r = s.insert({"b", 3});
    CHECK(r.gain == 3.0);

    SUBCASE("better score evicts the minimum") {
        r = s.insert({"c", 4});
        CHECK(r.gain == 1.0);
        REQUIRE(r.evicted);
        CHECK(r.evicted->id == "b");
        CHECK(r.evicted->score == 3.0);
        CHECK(s.stk_value() == 9.0);
    }

    SUBCASE("worse score is rejected") {
        r = s.insert({"c", 2});
        CHECK(r.gain == 0.0);
        CHECK(!r.evicted);
        CHECK(s.stk_value() == 8.0);
    }

    SUBCASE("equal score at the boundary is rejected") {
        r = s.insert({"c", 3});
        CHECK(r.gain == 0.0);
        CHECK(!r.evicted);
    }
}

TEST_CASE("eviction ties pick the smallest id") {
    TopKSolution s(3);
    s.insert({"zed", 1});
    s.insert({"ann", 1});
    s.insert({"mid", 1});
    const auto r = s.insert({"new", 2});
    REQUIRE(r.evicted);
    CHECK(r.evicted->id == "ann");
}

TEST_CASE("insert rejects invalid scores") {
    TopKSolution s(2);
    CHECK_THROWS_AS(s.insert({"a", -1.0}), std::invalid_argument);
    CHECK_THROWS_AS(s.insert({"a", std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(TopKSolution(0), std::invalid_argument);
}

TEST_CASE("telescoping: cached stk equals recomputation and the gain sum") {
    Rng rng(13);
    for (int round = 0; round < 50; ++round) {
        const std::size_t k = 1 + rng.uniform_int(5);
        TopKSolution s(k);
        double gain_sum = 0.0;
        std::vector<Score> seen;
        const std::size_t inserts = 1 + rng.uniform_int(40);
        for (std::size_t i = 0; i < inserts; ++i) {
            const double score = rng.uniform(0.0, 10.0);
            seen.push_back(score);
            gain_sum += s.insert({"e" + std::to_string(i), score}).gain;
        }
        const double recomputed = stk(seen, k);
        CHECK(s.stk_value() == doctest::Approx(recomputed).epsilon(1e-9));
        CHECK(s.stk_value() == doctest::Approx(gain_sum).epsilon(1e-9));
        CHECK(s.size() == std::min(k, seen.size()));
    }
}

TEST_CASE("monotonicity and diminishing returns on small random multisets") {
    Rng rng(7);
    for (int round = 0; round < 200; ++round) {
        const std::size_t k = 1 + rng.uniform_int(3);
        std::vector<Score> s1;
        const std::size_t base = rng.uniform_int(5);
        for (std::size_t i = 0; i < base; ++i) s1.push_back(static_cast<double>(rng.uniform_int(4)));
        std::vector<Score> s2 = s1;
        const std::size_t extra = rng.uniform_int(4);
        for (std::size_t i = 0; i < extra; ++i) s2.push_back(static_cast<double>(rng.uniform_int(4)));
        const double x = static_cast<double>(rng.uniform_int(4));

        auto s1x = s1;
        s1x.push_back(x);
        auto s2x = s2;
        s2x.push_back(x);
        const double gain1 = stk(s1x, k) - stk(s1, k);
        const double gain2 = stk(s2x, k) - stk(s2, k);
        CHECK(gain1 >= 0.0);
        CHECK(gain1 >= gain2);
    }
}

TEST_CASE("entries_sorted orders by score desc then id asc") {
    TopKSolution s(4);
    s.insert({"b", 2});
    s.insert({"a", 2});
    s.insert({"c", 9});
    const auto sorted = s.entries_sorted();
    REQUIRE(sorted.size() == 3);
    CHECK(sorted[0].id == "c");
    CHECK(sorted[1].id == "a");
    CHECK(sorted[2].id == "b");
}
