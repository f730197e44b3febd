#include "otk/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "otk/rng.hpp"

namespace otk {

namespace {

double squared_distance(const Vector& a, const Vector& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

std::size_t nearest_centroid(const Vector& v, const std::vector<Vector>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(v, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<Vector> kmeans_plus_plus_seeds(const std::vector<VectorEntry>& points,
                                           std::size_t cluster_count, Rng& rng) {
    std::vector<Vector> centroids;
    centroids.reserve(cluster_count);
    centroids.push_back(points[rng.uniform_int(points.size())].vec);

    std::vector<double> dist2(points.size());
    while (centroids.size() < cluster_count) {
        double sum = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids)
                best = std::min(best, squared_distance(points[i].vec, c));
            dist2[i] = best;
            sum += best;
        }
        std::size_t pick;
        if (sum <= 0.0) {
            // all remaining points coincide with a centroid
            pick = rng.uniform_int(points.size());
        } else {
            const double target = rng.uniform01() * sum;
            double acc = 0.0;
            pick = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += dist2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(points[pick].vec);
    }
    return centroids;
}

}  // namespace

std::vector<KMeansCluster> kmeans(const std::vector<VectorEntry>& points,
                                  std::size_t cluster_count, std::uint64_t seed) {
    if (cluster_count == 0) throw std::invalid_argument("kmeans: cluster_count must be positive");
    if (cluster_count > points.size())
        throw std::invalid_argument("kmeans: cluster_count exceeds number of points");

    Rng rng(seed);
    std::vector<Vector> centroids = kmeans_plus_plus_seeds(points, cluster_count, rng);
    std::vector<std::size_t> assignment(points.size(), 0);

    constexpr int kMaxIterations = 100;
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t c = nearest_centroid(points[i].vec, centroids);
            if (c != assignment[i]) {
                assignment[i] = c;
                changed = true;
            }
        }

        std::vector<std::size_t> counts(cluster_count, 0);
        for (std::size_t a : assignment) ++counts[a];

        // repair empty clusters: steal the point farthest from its centroid
        for (std::size_t c = 0; c < cluster_count; ++c) {
            if (counts[c] > 0) continue;
            double worst = -1.0;
            std::size_t steal = points.size();
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (counts[assignment[i]] < 2) continue;
                const double d = squared_distance(points[i].vec, centroids[assignment[i]]);
                if (d > worst) {
                    worst = d;
                    steal = i;
                }
            }
            --counts[assignment[steal]];
            assignment[steal] = c;
            ++counts[c];
            centroids[c] = points[steal].vec;
            changed = true;
        }

        const std::size_t dim = points[0].vec.size();
        std::vector<Vector> sums(cluster_count, Vector(dim, 0.0));
        for (std::size_t i = 0; i < points.size(); ++i)
            for (std::size_t d = 0; d < dim; ++d) sums[assignment[i]][d] += points[i].vec[d];
        for (std::size_t c = 0; c < cluster_count; ++c)
            for (std::size_t d = 0; d < dim; ++d)
                centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);

        if (!changed) break;
    }

    std::vector<KMeansCluster> clusters(cluster_count);
    for (std::size_t c = 0; c < cluster_count; ++c) clusters[c].centroid = centroids[c];
    for (std::size_t i = 0; i < points.size(); ++i)
        clusters[assignment[i]].members.push_back(points[i].id);
    return clusters;
}

Dendrogram hac_average_linkage(const std::vector<Vector>& centroids) {
    if (centroids.empty()) throw std::invalid_argument("hac_average_linkage: no centroids");
    const std::size_t n = centroids.size();

    Dendrogram tree;
    tree.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) tree.nodes[i].centroid = static_cast<int>(i);
    if (n == 1) {
        tree.root = 0;
        return tree;
    }

    struct Group {
        int node;          // dendrogram node index, doubles as the group id
        std::size_t size;  // number of centroids beneath
    };
    std::vector<Group> active;
    active.reserve(n);
    for (std::size_t i = 0; i < n; ++i) active.push_back({static_cast<int>(i), 1});

    // pairwise average-linkage distances, keyed by dendrogram node index
    std::vector<std::vector<double>> dist(2 * n - 1, std::vector<double>());
    for (auto& row : dist) row.assign(2 * n - 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::sqrt(squared_distance(centroids[i], centroids[j]));
            dist[i][j] = dist[j][i] = d;
        }

    while (active.size() > 1) {
        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < active.size(); ++i)
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                const double d = dist[active[i].node][active[j].node];
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
                // equal distances fall through: scanning in ascending node id
                // order already selects the smallest pair first
            }

        const Group a = active[bi];
        const Group b = active[bj];
        Dendrogram::Node merged;
        merged.left = std::min(a.node, b.node);
        merged.right = std::max(a.node, b.node);
        const int merged_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(merged);

        // Lance-Williams update for average linkage
        for (const Group& g : active) {
            if (g.node == a.node || g.node == b.node) continue;
            const double d =
                (static_cast<double>(a.size) * dist[a.node][g.node] +
                 static_cast<double>(b.size) * dist[b.node][g.node]) /
                static_cast<double>(a.size + b.size);
            dist[merged_id][g.node] = dist[g.node][merged_id] = d;
        }

        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
        active.push_back({merged_id, a.size + b.size});
        std::sort(active.begin(), active.end(),
                  [](const Group& x, const Group& y) { return x.node < y.node; });
    }

    tree.root = active.front().node;
    return tree;
}

namespace {

IndexNode materialize(const Dendrogram& tree, int node,
                      const std::vector<KMeansCluster>& clusters) {
    const Dendrogram::Node& d = tree.nodes[static_cast<std::size_t>(node)];
    IndexNode out;
    if (d.is_leaf()) {
        out.node_id = "leaf-" + std::to_string(d.centroid);
        out.elements = clusters[static_cast<std::size_t>(d.centroid)].members;
        out.centroid = clusters[static_cast<std::size_t>(d.centroid)].centroid;
    } else {
        out.node_id = "node-" + std::to_string(node);
        out.children.push_back(materialize(tree, d.left, clusters));
        out.children.push_back(materialize(tree, d.right, clusters));
    }
    return out;
}

}  // namespace

Index assemble_index(const std::vector<KMeansCluster>& clusters) {
    if (clusters.empty()) throw std::invalid_argument("assemble_index: no clusters");
    std::vector<Vector> centroids;
    centroids.reserve(clusters.size());
    std::size_t total = 0;
    for (const auto& c : clusters) {
        if (c.members.empty()) throw std::invalid_argument("assemble_index: empty cluster");
        centroids.push_back(c.centroid);
        total += c.members.size();
    }
    const Dendrogram tree = hac_average_linkage(centroids);

    Index index;
    index.root = materialize(tree, tree.root, clusters);
    index.leaf_count = clusters.size();
    index.dataset_size = total;
    return index;
}

Index build_index(const std::vector<VectorEntry>& dataset, std::size_t cluster_count,
                  std::optional<std::size_t> clustering_subsample, std::uint64_t seed) {
    if (cluster_count == 0 || cluster_count > dataset.size())
        throw std::invalid_argument("build_index: need 1 <= cluster_count <= dataset size");

    Rng rng(seed);
    std::vector<KMeansCluster> clusters;
    if (clustering_subsample && *clustering_subsample < dataset.size()) {
        const std::size_t m = std::max(*clustering_subsample, cluster_count);
        std::vector<std::size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::vector<VectorEntry> sample;
        sample.reserve(m);
        for (std::size_t i = 0; i < m; ++i) sample.push_back(dataset[order[i]]);
        clusters = kmeans(sample, cluster_count, seed);
    } else {
        clusters = kmeans(dataset, cluster_count, seed);
    }

    // assign every element (sampled or not) to its nearest centroid
    std::vector<Vector> centroids;
    centroids.reserve(clusters.size());
    for (const auto& c : clusters) centroids.push_back(c.centroid);
    for (auto& c : clusters) c.members.clear();
    for (const auto& entry : dataset)
        clusters[nearest_centroid(entry.vec, centroids)].members.push_back(entry.id);

    // a full-dataset assignment pass can leave a subsample-fit cluster empty
    std::erase_if(clusters, [](const KMeansCluster& c) { return c.members.empty(); });

    return assemble_index(clusters);
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json node_to_json(const IndexNode& node) {
    ordered_json j;
    j["node_id"] = node.node_id;
    if (node.is_leaf()) {
        j["elements"] = node.elements;
        j["centroid"] = node.centroid;
    } else {
        ordered_json children = ordered_json::array();
        for (const auto& child : node.children) children.push_back(node_to_json(child));
        j["children"] = std::move(children);
    }
    return j;
}

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw std::runtime_error("index schema error at " + path + ": " + what);
}

IndexNode node_from_json(const nlohmann::json& j, const std::string& path,
                         std::unordered_set<std::string>& seen_ids, std::size_t& leaves,
                         std::size_t& elements_total) {
    if (!j.is_object()) schema_error(path, "node is not an object");
    IndexNode node;
    if (!j.contains("node_id") || !j["node_id"].is_string() || j["node_id"].get<std::string>().empty())
        schema_error(path, "missing or empty node_id");
    node.node_id = j["node_id"].get<std::string>();

    const bool has_children = j.contains("children") && j["children"].is_array() && !j["children"].empty();
    const bool has_elements = j.contains("elements") && j["elements"].is_array() && !j["elements"].empty();
    if (has_children && has_elements)
        schema_error(path, "node has both children and elements");
    if (!has_children && !has_elements)
        schema_error(path, "node has neither children nor elements");

    if (has_children) {
        std::size_t i = 0;
        for (const auto& child : j["children"]) {
            node.children.push_back(node_from_json(child, path + ".children[" + std::to_string(i) + "]",
                                                   seen_ids, leaves, elements_total));
            ++i;
        }
    } else {
        ++leaves;
        for (const auto& e : j["elements"]) {
            if (!e.is_string()) schema_error(path, "element id is not a string");
            auto id = e.get<std::string>();
            if (id.empty()) schema_error(path, "empty element id");
            if (!seen_ids.insert(id).second)
                schema_error(path, "duplicate element id '" + id + "'");
            node.elements.push_back(std::move(id));
        }
        elements_total += node.elements.size();
        if (!j.contains("centroid") || !j["centroid"].is_array())
            schema_error(path, "leaf missing centroid");
        for (const auto& v : j["centroid"]) {
            if (!v.is_number()) schema_error(path, "centroid component is not a number");
            const double x = v.get<double>();
            if (!std::isfinite(x)) schema_error(path, "centroid component is not finite");
            node.centroid.push_back(x);
        }
    }
    return node;
}

}  // namespace

std::string index_to_json_string(const Index& index) {
    ordered_json j;
    j["version"] = 1;
    j["dataset_size"] = index.dataset_size;
    j["leaf_count"] = index.leaf_count;
    j["root"] = node_to_json(index.root);
    return j.dump();
}

void save_index(const Index& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_index: cannot open " + path);
    out << index_to_json_string(index);
    if (!out) throw std::runtime_error("save_index: write failed for " + path);
}

Index load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_index: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("load_index: malformed JSON in " + path + ": " + e.what());
    }

    if (!j.is_object()) throw std::runtime_error("load_index: top level is not an object");
    if (!j.contains("version") || j["version"] != 1)
        throw std::runtime_error("load_index: unsupported or missing version");
    if (!j.contains("root")) throw std::runtime_error("load_index: missing root");

    Index index;
    std::unordered_set<std::string> seen_ids;
    std::size_t leaves = 0;
    std::size_t elements_total = 0;
    index.root = node_from_json(j["root"], "root", seen_ids, leaves, elements_total);

    if (!j.contains("leaf_count") || !j["leaf_count"].is_number_unsigned())
        throw std::runtime_error("load_index: missing leaf_count");
    if (!j.contains("dataset_size") || !j["dataset_size"].is_number_unsigned())
        throw std::runtime_error("load_index: missing dataset_size");
    index.leaf_count = j["leaf_count"].get<std::size_t>();
    index.dataset_size = j["dataset_size"].get<std::size_t>();
    if (index.leaf_count != leaves)
        throw std::runtime_error("load_index: leaf_count " + std::to_string(index.leaf_count) +
                                 " does not match actual leaves " + std::to_string(leaves));
    if (index.dataset_size != elements_total)
        throw std::runtime_error("load_index: dataset_size " + std::to_string(index.dataset_size) +
                                 " does not match element total " + std::to_string(elements_total));
    return index;
}

}  // namespace otk
