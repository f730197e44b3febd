#include "otk/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "otk/rng.hpp"

namespace otk {

const DatasetElement* Dataset::find(const ElementId& id) const {
    const auto it = lookup_.find(id);
    return it == lookup_.end() ? nullptr : &elements[it->second];
}

std::vector<ElementId> Dataset::all_ids() const {
    std::vector<ElementId> ids;
    ids.reserve(elements.size());
    for (const auto& e : elements) ids.push_back(e.id);
    return ids;
}

std::vector<VectorEntry> Dataset::vector_entries() const {
    std::vector<VectorEntry> out;
    out.reserve(elements.size());
    for (const auto& e : elements) out.push_back({e.id, e.vec});
    return out;
}

void Dataset::rebuild_lookup() {
    lookup_.clear();
    lookup_.reserve(elements.size());
    for (std::size_t i = 0; i < elements.size(); ++i) {
        if (!lookup_.emplace(elements[i].id, i).second)
            throw std::runtime_error("Dataset: duplicate element id '" + elements[i].id + "'");
    }
}

namespace {

ElementId make_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "e%06zu", i);
    return buf;
}

}  // namespace

Dataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.cluster_count == 0 || spec.samples_per_cluster == 0)
        throw std::invalid_argument("gen_synthetic: cluster_count and samples_per_cluster must be positive");

    Rng rng(spec.seed);
    Dataset dataset;
    dataset.elements.reserve(spec.cluster_count * spec.samples_per_cluster);
    std::size_t next_id = 0;
    for (std::size_t c = 0; c < spec.cluster_count; ++c) {
        const double mu = rng.uniform(spec.mu_min, spec.mu_max);
        // sigma in (0, sigma_max]: uniform01 is in [0, 1), so this never hits 0
        const double sigma = spec.sigma_max * (1.0 - rng.uniform01());
        for (std::size_t i = 0; i < spec.samples_per_cluster; ++i) {
            const double v = std::max(0.0, rng.normal(mu, sigma));
            dataset.elements.push_back({make_id(next_id++), {v}, v, static_cast<int>(c)});
        }
    }
    dataset.rebuild_lookup();
    return dataset;
}

Index index_from_labels(const Dataset& dataset) {
    std::map<int, KMeansCluster> by_label;
    for (const auto& e : dataset.elements) {
        if (e.cluster < 0)
            throw std::invalid_argument("index_from_labels: element '" + e.id + "' has no label");
        auto& cluster = by_label[e.cluster];
        cluster.members.push_back(e.id);
        if (cluster.centroid.empty()) cluster.centroid.assign(e.vec.size(), 0.0);
        for (std::size_t d = 0; d < e.vec.size(); ++d) cluster.centroid[d] += e.vec[d];
    }
    std::vector<KMeansCluster> clusters;
    clusters.reserve(by_label.size());
    for (auto& [label, cluster] : by_label) {
        for (double& c : cluster.centroid) c /= static_cast<double>(cluster.members.size());
        clusters.push_back(std::move(cluster));
    }
    return assemble_index(clusters);
}

Dataset gen_no_signal(std::size_t cluster_count, std::size_t samples_per_cluster,
                      std::uint64_t seed) {
    Rng rng(seed);
    Dataset dataset;
    const std::size_t n = cluster_count * samples_per_cluster;
    dataset.elements.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double junk = rng.uniform01();  // clusterable but uninformative
        const double v = std::max(0.0, rng.normal(10.0, 3.0));
        dataset.elements.push_back({make_id(i), {junk}, v, static_cast<int>(i % cluster_count)});
    }
    dataset.rebuild_lookup();
    return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    nlohmann::ordered_json elems = nlohmann::ordered_json::array();
    for (const auto& e : dataset.elements) {
        nlohmann::ordered_json je;
        je["id"] = e.id;
        je["vector"] = e.vec;
        je["value"] = e.value;
        if (e.cluster >= 0) je["cluster"] = e.cluster;
        elems.push_back(std::move(je));
    }
    j["elements"] = std::move(elems);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
    out << j.dump();
    if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("load_dataset: malformed JSON in " + path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("elements") || !j["elements"].is_array())
        throw std::runtime_error("load_dataset: missing elements array");

    Dataset dataset;
    for (const auto& je : j["elements"]) {
        DatasetElement e;
        if (!je.contains("id") || !je["id"].is_string())
            throw std::runtime_error("load_dataset: element missing string id");
        e.id = je["id"].get<std::string>();
        if (!je.contains("vector") || !je["vector"].is_array())
            throw std::runtime_error("load_dataset: element missing vector");
        for (const auto& v : je["vector"]) e.vec.push_back(v.get<double>());
        if (!je.contains("value") || !je["value"].is_number())
            throw std::runtime_error("load_dataset: element missing value");
        e.value = je["value"].get<double>();
        if (je.contains("cluster")) e.cluster = je["cluster"].get<int>();
        dataset.elements.push_back(std::move(e));
    }
    dataset.rebuild_lookup();
    return dataset;
}

}  // namespace otk
