#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "goldsift/dataset.hpp"
#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"
#include "goldsift/scoring.hpp"

namespace goldsift {

enum class ThresholdDirection {
    Greater,  // gs > tau
    AtMost,   // gs <= tau
};

struct SubsetManifest {
    std::string predicate;
    std::vector<std::string> candidate_ids;  // selection order
    std::string source_table_fingerprint;

    std::size_t count() const { return candidate_ids.size(); }
};

// Content fingerprint of a golden-score table, binding manifests to the
// exact scores they were cut from.
inline std::string table_fingerprint(const GoldenScoreTable& table) {
    std::uint64_t h = fnv1a64(table.run_config_fingerprint);
    for (const auto& rec : table.records) {
        h = fnv1a64(rec.candidate_id, h);
        h = fnv1a64_u64(rec.improvements, h);
        h = fnv1a64_u64(rec.m, h);
        h = fnv1a64_u64(rec.overflow_count, h);
    }
    return to_hex(h);
}

namespace detail {

// Descending gs, ascending id. The deterministic order used for subset
// listings and top-fraction cuts.
inline std::vector<const GoldenScoreRecord*> rank_records(const GoldenScoreTable& table) {
    std::vector<const GoldenScoreRecord*> ranked;
    ranked.reserve(table.records.size());
    for (const auto& r : table.records) ranked.push_back(&r);
    std::sort(ranked.begin(), ranked.end(),
              [](const GoldenScoreRecord* a, const GoldenScoreRecord* b) {
                  if (a->gs != b->gs) return a->gs > b->gs;
                  return id_less(a->candidate_id, b->candidate_id);
              });
    return ranked;
}

inline std::string format_tau(double tau) {
    nlohmann::json j = tau;
    return j.dump();
}

}  // namespace detail

inline SubsetManifest threshold_subset(const GoldenScoreTable& table, double tau,
                                       ThresholdDirection direction) {
    SubsetManifest manifest;
    manifest.source_table_fingerprint = table_fingerprint(table);
    manifest.predicate = direction == ThresholdDirection::Greater
                             ? "gs > " + detail::format_tau(tau)
                             : "gs <= " + detail::format_tau(tau);
    for (const GoldenScoreRecord* rec : detail::rank_records(table)) {
        bool keep = direction == ThresholdDirection::Greater ? rec->gs > tau : rec->gs <= tau;
        if (keep) manifest.candidate_ids.push_back(rec->candidate_id);
    }
    return manifest;
}

// The ceil(p*N) highest-gs candidates; ties at the cut resolved by
// ascending id so the selection is deterministic.
inline SubsetManifest top_fraction(const GoldenScoreTable& table, double p) {
    if (!(p > 0.0) || p > 1.0) {
        throw ConfigError("top fraction must lie in (0, 1]");
    }
    if (table.records.empty()) {
        throw ConfigError("cannot take a top fraction of an empty table");
    }
    std::size_t k = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(table.records.size())));

    SubsetManifest manifest;
    manifest.source_table_fingerprint = table_fingerprint(table);
    manifest.predicate = "top-frac " + detail::format_tau(p);
    auto ranked = detail::rank_records(table);
    for (std::size_t i = 0; i < k && i < ranked.size(); ++i) {
        manifest.candidate_ids.push_back(ranked[i]->candidate_id);
    }
    return manifest;
}

inline SubsetManifest top_k(const GoldenScoreTable& table, std::size_t k) {
    if (k == 0 || k > table.records.size()) {
        throw ConfigError("top-k must lie in [1, table size]");
    }
    SubsetManifest manifest;
    manifest.source_table_fingerprint = table_fingerprint(table);
    manifest.predicate = "top-k " + std::to_string(k);
    auto ranked = detail::rank_records(table);
    for (std::size_t i = 0; i < k; ++i) {
        manifest.candidate_ids.push_back(ranked[i]->candidate_id);
    }
    return manifest;
}

// Writes the original records in manifest order plus a `<path>.meta.json`
// sidecar carrying the selection provenance.
inline void export_subset(const SubsetManifest& manifest, const Dataset& dataset,
                          const std::string& path,
                          DatasetFormat format = DatasetFormat::Auto) {
    write_records(dataset, manifest.candidate_ids, path, format);

    nlohmann::json meta;
    meta["predicate"] = manifest.predicate;
    meta["count"] = manifest.count();
    meta["source_table_fingerprint"] = manifest.source_table_fingerprint;
    meta["dataset_fingerprint"] = dataset.content_fingerprint();
    meta["candidate_ids"] = manifest.candidate_ids;

    std::string meta_path = path + ".meta.json";
    std::ofstream out(meta_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + meta_path + "' for writing");
    out << meta.dump(2) << "\n";
    if (!out) throw DataError("failed writing '" + meta_path + "'");
}

}  // namespace goldsift
