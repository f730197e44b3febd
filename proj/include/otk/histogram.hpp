#pragma once

#include <cstddef>
#include <vector>

namespace otk {

/// Adaptive equal-width histogram modelling one arm's score distribution.
///
/// The sketch covers [0, max_edge()] with a fixed number of bins. Mass is
/// fractional: maintenance operations (range extension, low-bin collapse,
/// subtraction) redistribute it under the uniform value assumption, i.e.
/// treating the mass inside each bin as uniformly spread over the bin.
class HistogramSketch {
public:
    HistogramSketch() = default;

    /// B equal-width empty bins over [0, initial_max]. B must be >= 2 (the
    /// low-bin collapse rule needs a second lowest bin) and initial_max > 0.
    HistogramSketch(std::size_t bucket_count, double initial_max);

    std::size_t bucket_count() const { return mass_.size(); }
    const std::vector<double>& edges() const { return edges_; }
    const std::vector<double>& mass() const { return mass_; }
    double total_mass() const { return total_; }
    double max_edge() const { return edges_.back(); }

    /// Add one observation. The caller must extend the range first when the
    /// score exceeds max_edge(). Scores on an interior edge go to the upper
    /// bin; a score equal to max_edge() goes to the top bin.
    void record(double score);

    /// Expected STK gain of one draw from the sketch, against threshold
    /// `kth`: the mean of max(x - kth, 0) under the piecewise-uniform
    /// density. Returns 0 for an empty sketch.
    double expected_gain(double kth) const;

    /// Grow the range to [0, beta * observed] (observed must exceed the
    /// current max edge, beta >= 1) and re-bin to equal widths, spreading
    /// existing mass by interval overlap. Total mass is conserved.
    void extend_range(double observed, double beta);

    /// Merge every bin below `kth` into a single bottom bin [0, e], where e
    /// is the largest edge <= kth, and split the rest of the range into B-1
    /// equal-width bins. Meant to be applied once the running solution's
    /// k-th score has passed the second lowest bin. Total mass is conserved.
    void collapse_low(double kth);

    /// Remove a child's mass from this sketch, spreading each child bin
    /// uniformly across the overlapped range. Bins are clamped at zero.
    void subtract(const HistogramSketch& child);

private:
    std::size_t bin_of(double score) const;
    void rebuild(std::vector<double> new_edges);

    std::vector<double> edges_;  // bucket_count+1 ascending values, edges_[0] == 0
    std::vector<double> mass_;   // one non-negative value per bin
    double total_ = 0.0;
};

}  // namespace otk
