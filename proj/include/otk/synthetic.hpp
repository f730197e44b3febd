#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "otk/core.hpp"
#include "otk/index.hpp"

namespace otk {

/// Clustered synthetic data: per cluster, one normal score distribution
/// with mu ~ U[0, 20] and sigma ~ U(0, 5]; drawn values pass through
/// max(0, x) and double as the 1-D feature vector.
struct SyntheticSpec {
    std::size_t cluster_count = 20;
    std::size_t samples_per_cluster = 2500;
    double mu_min = 0.0;
    double mu_max = 20.0;
    double sigma_max = 5.0;
    std::uint64_t seed = 0;
};

struct DatasetElement {
    ElementId id;
    Vector vec;
    double value = 0.0;  // hidden payload handed to the scorer
    int cluster = -1;    // generator's ground-truth label, -1 when unknown
};

struct Dataset {
    std::vector<DatasetElement> elements;

    const DatasetElement* find(const ElementId& id) const;
    std::vector<ElementId> all_ids() const;
    std::vector<VectorEntry> vector_entries() const;
    void rebuild_lookup();

private:
    std::unordered_map<std::string, std::size_t> lookup_;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

/// Index whose leaves are the generator's clusters, with the dendrogram
/// built over the per-cluster mean vectors. This is the synthetic-benchmark
/// index shape: no re-clustering of the drawn values.
Index index_from_labels(const Dataset& dataset);

/// Clustered-looking vectors whose scores are i.i.d. from one shared
/// distribution, so the index carries no usable signal.
Dataset gen_no_signal(std::size_t cluster_count, std::size_t samples_per_cluster,
                      std::uint64_t seed);

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace otk
