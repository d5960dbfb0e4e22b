#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "goldsift/dataset.hpp"
#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"
#include "goldsift/kmeans.hpp"
#include "goldsift/prompt.hpp"

namespace goldsift {

// One predefined task: the rendered query text plus its ground-truth answer.
struct AnchorTask {
    std::string anchor_id;
    std::string task_text;
    std::string answer_text;
    std::string source_example_id;
};

struct AnchorConstruction {
    std::string method;  // "random" | "kmeans"
    std::uint64_t seed = 0;
    nlohmann::json parameters = nlohmann::json::object();
};

struct AnchorSet {
    std::vector<AnchorTask> anchors;
    AnchorConstruction construction;

    std::size_t m() const { return anchors.size(); }

    std::string fingerprint() const {
        nlohmann::json j;
        j["method"] = construction.method;
        j["seed"] = construction.seed;
        j["parameters"] = construction.parameters;
        nlohmann::json list = nlohmann::json::array();
        for (const auto& a : anchors) {
            list.push_back({{"anchor_id", a.anchor_id},
                            {"task_text", a.task_text},
                            {"answer_text", a.answer_text},
                            {"source_example_id", a.source_example_id}});
        }
        j["anchors"] = std::move(list);
        return goldsift::fingerprint(j.dump());
    }
};

using EmbedFn = std::function<std::vector<double>(const std::string&)>;

namespace detail {

inline std::vector<std::size_t> eligible_indices(const Dataset& dataset) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!dataset.examples[i].empty_output()) out.push_back(i);
    }
    return out;
}

inline AnchorTask make_anchor(const InstructionExample& ex, std::size_t position,
                              const PromptTemplate& tmpl) {
    AnchorTask a;
    a.anchor_id = std::to_string(position);
    a.task_text = render(ex, tmpl, RenderRole::Query);
    a.answer_text = ex.answer;
    a.source_example_id = ex.id;
    return a;
}

inline void l2_normalize(std::vector<double>& v) {
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 <= 0.0) return;
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
}

}  // namespace detail

// Uniform sample without replacement from examples with non-empty answers.
// Anchor order is the sampling sequence.
inline AnchorSet sample_random(const Dataset& dataset, std::size_t m, std::uint64_t seed,
                               const PromptTemplate& tmpl = default_template()) {
    std::vector<std::size_t> pool = detail::eligible_indices(dataset);
    if (m == 0) throw ConfigError("m must be positive");
    if (m > pool.size()) {
        throw ConfigError("m=" + std::to_string(m) + " exceeds the eligible pool of " +
                          std::to_string(pool.size()) + " examples with non-empty answers");
    }

    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t j = i + goldsift::detail::uniform_index(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
    }

    AnchorSet set;
    set.construction.method = "random";
    set.construction.seed = seed;
    set.construction.parameters = {{"m", m}};
    set.anchors.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        set.anchors.push_back(detail::make_anchor(dataset.examples[pool[i]], i, tmpl));
    }
    return set;
}

// Embeds the eligible examples, clusters them with K-Means, and picks the
// nearest real example to each centroid (next-nearest on collisions), since
// an anchor must be an actual scoreable (task, answer) pair. The embedded
// text is the raw example content, not the rendered prompt, so the shared
// prompt scaffolding does not dominate the geometry.
inline AnchorSet sample_kmeans(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                               const EmbedFn& embed,
                               const PromptTemplate& tmpl = default_template(),
                               const KMeansOptions& opts = {},
                               std::vector<double>* wcss_history = nullptr) {
    std::vector<std::size_t> pool = detail::eligible_indices(dataset);
    if (k == 0) throw ConfigError("k must be positive");
    if (k > pool.size()) {
        throw ConfigError("k=" + std::to_string(k) + " exceeds the eligible pool of " +
                          std::to_string(pool.size()) + " examples with non-empty answers");
    }

    std::vector<std::vector<double>> points;
    points.reserve(pool.size());
    std::size_t dim = 0;
    for (std::size_t idx : pool) {
        const auto& ex = dataset.examples[idx];
        std::string text = ex.instruction;
        if (!ex.input.empty()) text += "\n" + ex.input;
        text += "\n" + ex.answer;
        std::vector<double> v = embed(text);
        if (dim == 0) {
            dim = v.size();
        } else if (v.size() != dim) {
            throw BackendError(BackendError::Kind::DimensionDrift,
                               "embedding dimension changed from " + std::to_string(dim) +
                                   " to " + std::to_string(v.size()) + " within one run");
        }
        detail::l2_normalize(v);
        points.push_back(std::move(v));
    }

    KMeansResult km = kmeans(points, k, seed, opts);
    if (wcss_history) *wcss_history = km.wcss_history;

    std::vector<bool> used(points.size(), false);
    AnchorSet set;
    set.construction.method = "kmeans";
    set.construction.seed = seed;
    set.construction.parameters = {{"k", k},
                                   {"max_iter", opts.max_iter},
                                   {"tol", opts.tol},
                                   {"iterations", km.iterations},
                                   {"converged", km.converged}};
    set.anchors.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
        double best = std::numeric_limits<double>::max();
        std::size_t best_i = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (used[i]) continue;
            double d2 = goldsift::detail::squared_distance(points[i], km.centroids[c]);
            if (d2 < best) {
                best = d2;
                best_i = i;
            }
        }
        used[best_i] = true;
        set.anchors.push_back(detail::make_anchor(dataset.examples[pool[best_i]],
                                                  set.anchors.size(), tmpl));
    }
    return set;
}

inline nlohmann::json anchors_to_json(const AnchorSet& set) {
    nlohmann::json j;
    j["construction"] = {{"method", set.construction.method},
                         {"seed", set.construction.seed},
                         {"parameters", set.construction.parameters}};
    j["fingerprint"] = set.fingerprint();
    j["m"] = set.m();
    nlohmann::json list = nlohmann::json::array();
    for (const auto& a : set.anchors) {
        list.push_back({{"anchor_id", a.anchor_id},
                        {"task_text", a.task_text},
                        {"answer_text", a.answer_text},
                        {"source_example_id", a.source_example_id}});
    }
    j["anchors"] = std::move(list);
    return j;
}

inline void save_anchors(const AnchorSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << anchors_to_json(set).dump(2) << "\n";
    if (!out) throw DataError("failed writing '" + path + "'");
}

inline AnchorSet load_anchors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open anchor file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw DataError("cannot parse anchor file '" + path + "': " + ex.what());
    }

    AnchorSet set;
    try {
        set.construction.method = j.at("construction").at("method").get<std::string>();
        set.construction.seed = j.at("construction").at("seed").get<std::uint64_t>();
        set.construction.parameters = j.at("construction").at("parameters");
        for (const auto& a : j.at("anchors")) {
            AnchorTask task;
            task.anchor_id = a.at("anchor_id").get<std::string>();
            task.task_text = a.at("task_text").get<std::string>();
            task.answer_text = a.at("answer_text").get<std::string>();
            task.source_example_id = a.at("source_example_id").get<std::string>();
            if (trim(task.answer_text).empty()) {
                throw DataError("anchor '" + task.anchor_id + "' has an empty answer");
            }
            set.anchors.push_back(std::move(task));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw DataError("malformed anchor file '" + path + "': " + ex.what());
    }

    if (j.contains("fingerprint") && j.at("fingerprint").get<std::string>() != set.fingerprint()) {
        throw DataError("anchor file '" + path + "' fingerprint mismatch (contents were modified)");
    }
    return set;
}

}  // namespace goldsift
