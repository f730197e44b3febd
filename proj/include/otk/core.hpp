#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace otk {

/// Unique string identifier of one dataset element.
using ElementId = std::string;

/// Non-negative, finite score produced by the scoring function.
using Score = double;

struct ScoredElement {
    ElementId id;
    Score score = 0.0;

    bool operator==(const ScoredElement& other) const = default;
};

/// Sum of the min(k, |scores|) largest values. Empty input returns 0.
inline Score stk(std::vector<Score> scores, std::size_t k) {
    if (k == 0 || scores.empty()) return 0.0;
    const std::size_t take = std::min(k, scores.size());
    std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(take),
                      scores.end(), std::greater<>());
    Score sum = 0.0;
    for (std::size_t i = 0; i < take; ++i) sum += scores[i];
    return sum;
}

struct InsertResult {
    Score gain = 0.0;
    std::optional<ScoredElement> evicted;
};

/// Cardinality-bounded running solution ordered by score.
///
/// Holds at most k (score, id) entries; inserting into a full solution
/// evicts the current minimum only when the new score strictly beats it.
/// The sum of retained scores is kept incrementally, so stk_value() is O(1)
/// and always equals the sum of the marginal gains returned so far.
class TopKSolution {
public:
    using Entry = std::pair<Score, ElementId>;

    explicit TopKSolution(std::size_t k) : k_(k) {
        if (k == 0) throw std::invalid_argument("TopKSolution: k must be positive");
    }

    std::size_t k() const { return k_; }
    std::size_t size() const { return entries_.size(); }
    bool full() const { return entries_.size() == k_; }

    /// Cached sum of all retained scores.
    Score stk_value() const { return stk_; }

    /// k-th largest retained score; 0 while the solution is under-filled.
    Score kth_score() const { return full() ? entries_.begin()->first : 0.0; }

    /// Insert one scored element. Returns the marginal STK gain and, when a
    /// full solution improves, the evicted entry. Ties at the boundary are
    /// rejected (gain 0); ties at the minimum evict the smallest ElementId.
    InsertResult insert(ScoredElement e) {
        if (!(e.score >= 0.0) || !std::isfinite(e.score))
            throw std::invalid_argument("TopKSolution::insert: score must be non-negative and finite");
        InsertResult r;
        if (entries_.size() < k_) {
            r.gain = e.score;
            stk_ += e.score;
            entries_.emplace(e.score, std::move(e.id));
            return r;
        }
        const auto lowest = entries_.begin();
        if (e.score > lowest->first) {
            r.evicted = ScoredElement{lowest->second, lowest->first};
            r.gain = e.score - lowest->first;
            stk_ += r.gain;
            entries_.erase(lowest);
            entries_.emplace(e.score, std::move(e.id));
        }
        return r;
    }

    /// Entries ordered by descending score, then ascending id.
    std::vector<ScoredElement> entries_sorted() const {
        std::vector<ScoredElement> out;
        out.reserve(entries_.size());
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
            out.push_back({it->second, it->first});
        // multiset iterates ascending (score, id); reversed gives descending
        // score but descending id within a tie, so fix tie order here.
        std::stable_sort(out.begin(), out.end(), [](const ScoredElement& a, const ScoredElement& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        return out;
    }

    const std::multiset<Entry>& entries() const { return entries_; }

private:
    std::size_t k_;
    std::multiset<Entry> entries_;  // ascending (score, id); begin() is the eviction candidate
    Score stk_ = 0.0;
};

}  // namespace otk
