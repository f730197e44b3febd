#include "otk/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace otk {

HistogramSketch::HistogramSketch(std::size_t bucket_count, double initial_max) {
    if (bucket_count < 2)
        throw std::invalid_argument("HistogramSketch: bucket_count must be >= 2");
    if (!(initial_max > 0.0) || !std::isfinite(initial_max))
        throw std::invalid_argument("HistogramSketch: initial_max must be positive and finite");
    edges_.resize(bucket_count + 1);
    for (std::size_t i = 0; i < bucket_count; ++i)
        edges_[i] = initial_max * static_cast<double>(i) / static_cast<double>(bucket_count);
    edges_[bucket_count] = initial_max;  // pin exactly; the scaled form can round off by an ulp
    mass_.assign(bucket_count, 0.0);
}

std::size_t HistogramSketch::bin_of(double score) const {
    if (score >= edges_.back()) return mass_.size() - 1;
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), score);
    return static_cast<std::size_t>(it - edges_.begin()) - 1;
}

void HistogramSketch::record(double score) {
    if (score < 0.0 || !std::isfinite(score))
        throw std::invalid_argument("HistogramSketch::record: score must be non-negative and finite");
    if (score > edges_.back())
        throw std::logic_error("HistogramSketch::record: score above max edge; extend_range first");
    mass_[bin_of(score)] += 1.0;
    total_ += 1.0;
}

double HistogramSketch::expected_gain(double kth) const {
    if (total_ <= 0.0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        const double m = mass_[i];
        if (m <= 0.0) continue;
        const double a = edges_[i];
        const double b = edges_[i + 1];
        if (kth <= a) {
            sum += m * (0.5 * (a + b) - kth);
        } else if (kth < b) {
            const double excess = b - kth;
            sum += m * excess * excess / (2.0 * (b - a));
        }
    }
    return sum / total_;
}

// Spread old mass over a new edge layout in proportion to interval overlap.
void HistogramSketch::rebuild(std::vector<double> new_edges) {
    std::vector<double> new_mass(new_edges.size() - 1, 0.0);
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        const double m = mass_[i];
        if (m <= 0.0) continue;
        const double a = edges_[i];
        const double b = edges_[i + 1];
        const double width = b - a;
        for (std::size_t j = 0; j + 1 < new_edges.size(); ++j) {
            const double lo = std::max(a, new_edges[j]);
            const double hi = std::min(b, new_edges[j + 1]);
            if (hi > lo) new_mass[j] += m * (hi - lo) / width;
        }
    }
    edges_ = std::move(new_edges);
    mass_ = std::move(new_mass);
    total_ = 0.0;
    for (double v : mass_) total_ += v;
}

void HistogramSketch::extend_range(double observed, double beta) {
    if (!(observed > edges_.back()))
        throw std::invalid_argument("HistogramSketch::extend_range: observed must exceed max edge");
    if (!(beta >= 1.0))
        throw std::invalid_argument("HistogramSketch::extend_range: beta must be >= 1");
    const double new_max = beta * observed;
    const std::size_t b = mass_.size();
    std::vector<double> new_edges(b + 1);
    for (std::size_t i = 0; i < b; ++i)
        new_edges[i] = new_max * static_cast<double>(i) / static_cast<double>(b);
    new_edges[b] = new_max;  // exact, so recording `observed` itself stays in range
    rebuild(std::move(new_edges));
}

void HistogramSketch::collapse_low(double kth) {
    const std::size_t b = mass_.size();
    // largest edge <= kth, kept strictly inside (0, max_edge) so the merged
    // bottom bin and the re-split upper region are both non-degenerate
    std::size_t e_idx = bin_of(kth);
    if (kth >= edges_.back()) e_idx = b;  // bin_of clamps to the top bin
    e_idx = std::clamp<std::size_t>(e_idx, 1, b - 1);
    const double e = edges_[e_idx];
    const double max = edges_.back();

    std::vector<double> new_edges(b + 1);
    new_edges[0] = 0.0;
    for (std::size_t j = 0; j + 1 < b; ++j)
        new_edges[j + 1] = e + (max - e) * static_cast<double>(j) / static_cast<double>(b - 1);
    new_edges[b] = max;  // keep the old max edge bit-exact across the re-split
    rebuild(std::move(new_edges));
}

void HistogramSketch::subtract(const HistogramSketch& child) {
    if (child.total_ <= 0.0) return;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        const double a = edges_[i];
        const double b = edges_[i + 1];
        double removal = 0.0;
        for (std::size_t j = 0; j < child.mass_.size(); ++j) {
            const double m = child.mass_[j];
            if (m <= 0.0) continue;
            const double c = child.edges_[j];
            const double d = child.edges_[j + 1];
            const double lo = std::max(a, c);
            const double hi = std::min(b, d);
            if (hi > lo) removal += m * (hi - lo) / (d - c);
        }
        mass_[i] = std::max(0.0, mass_[i] - removal);
    }
    total_ = 0.0;
    for (double v : mass_) total_ += v;
}

}  // namespace otk
