#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otk/core.hpp"

namespace otk {

/// Fixed-length feature vector used for clustering.
using Vector = std::vector<double>;

struct VectorEntry {
    ElementId id;
    Vector vec;
};

struct KMeansCluster {
    Vector centroid;
    std::vector<ElementId> members;
};

/// Seeded k-means (distance-weighted seeding, Lloyd iterations capped at
/// 100). Always yields exactly `cluster_count` non-empty clusters; empty
/// clusters are repaired by moving in the point farthest from its assigned
/// centroid. Deterministic given the seed.
std::vector<KMeansCluster> kmeans(const std::vector<VectorEntry>& points,
                                  std::size_t cluster_count, std::uint64_t seed);

/// Binary merge tree over centroid indices.
struct Dendrogram {
    struct Node {
        int left = -1;      // child node indices; -1 for leaves
        int right = -1;
        int centroid = -1;  // centroid index, leaves only
        bool is_leaf() const { return centroid >= 0; }
    };
    std::vector<Node> nodes;  // leaves first, merges appended in order
    int root = -1;
};

/// Agglomerative clustering with average linkage (Euclidean). Merge ties are
/// broken by the smallest participating node id, so the tree is
/// deterministic for a fixed centroid order.
Dendrogram hac_average_linkage(const std::vector<Vector>& centroids);

struct IndexNode {
    std::string node_id;
    std::vector<IndexNode> children;   // empty for leaves
    std::vector<ElementId> elements;   // leaves only
    Vector centroid;                   // leaves only

    bool is_leaf() const { return children.empty(); }
};

/// Immutable hierarchical cluster index: a dendrogram of k-means clusters.
/// Queries attach per-node histogram state to a private working copy, so one
/// index can serve many concurrent queries.
struct Index {
    IndexNode root;
    std::size_t leaf_count = 0;
    std::size_t dataset_size = 0;
};

/// Cluster the dataset (optionally running k-means on a subsample only,
/// then assigning every element to its nearest centroid) and build the
/// dendrogram over the centroids. Deterministic given the seed.
Index build_index(const std::vector<VectorEntry>& dataset, std::size_t cluster_count,
                  std::optional<std::size_t> clustering_subsample, std::uint64_t seed);

/// Build the tree over pre-made clusters: one leaf per cluster, dendrogram
/// over the given centroids. Clusters must be non-empty.
Index assemble_index(const std::vector<KMeansCluster>& clusters);

/// Serialized form of an index; stable bytes for identical inputs.
std::string index_to_json_string(const Index& index);

void save_index(const Index& index, const std::string& path);

/// Parse and validate an index file. Structural violations (duplicate
/// element ids, nodes with neither children nor elements, count mismatches)
/// raise std::runtime_error naming the offending node path.
Index load_index(const std::string& path);

}  // namespace otk
