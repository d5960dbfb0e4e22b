#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"
#include "goldsift/scoring.hpp"

namespace goldsift {

// Identifies the full provenance of a scoring run. A store only accepts
// appends for the configuration it was created with.
struct RunHeader {
    std::string config_fingerprint;
    std::string anchor_fingerprint;
    std::string backend_descriptor;  // backend config as JSON text, no secrets
    std::string policy;
    double tie_epsilon = 0.0;
    std::size_t m = 0;
};

namespace detail {

inline std::string line_checksum(nlohmann::json obj) {
    obj.erase("checksum");
    return fingerprint(obj.dump());
}

inline nlohmann::json header_to_json(const RunHeader& h) {
    nlohmann::json j;
    j["type"] = "header";
    j["version"] = 1;
    j["config_fingerprint"] = h.config_fingerprint;
    j["anchor_fingerprint"] = h.anchor_fingerprint;
    j["backend_descriptor"] = h.backend_descriptor;
    j["policy"] = h.policy;
    j["tie_epsilon"] = h.tie_epsilon;
    j["m"] = h.m;
    return j;
}

inline nlohmann::json profile_to_json(const ZeroShotProfile& p) {
    nlohmann::json j;
    j["type"] = "profile";
    j["scores"] = p.scores;
    j["anchor_fingerprint"] = p.anchor_fingerprint;
    j["backend_fingerprint"] = p.backend_fingerprint;
    return j;
}

inline nlohmann::json row_to_json(const OneShotRow& r) {
    nlohmann::json j;
    j["type"] = "row";
    j["candidate_id"] = r.candidate_id;
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : r.scores) {
        if (s) {
            scores.push_back(*s);
        } else {
            scores.push_back(nullptr);  // overflowed pair
        }
    }
    j["scores"] = std::move(scores);
    j["policy"] = r.policy_applied;
    j["self_pairs"] = r.self_pairs;
    j["anchor_fingerprint"] = r.anchor_fingerprint;
    return j;
}

inline OneShotRow row_from_json(const nlohmann::json& j) {
    OneShotRow r;
    r.candidate_id = j.at("candidate_id").get<std::string>();
    for (const auto& s : j.at("scores")) {
        if (s.is_null()) {
            r.scores.push_back(std::nullopt);
        } else {
            r.scores.push_back(s.get<double>());
        }
    }
    r.policy_applied = j.at("policy").get<std::string>();
    r.self_pairs = j.at("self_pairs").get<std::vector<std::size_t>>();
    r.anchor_fingerprint = j.at("anchor_fingerprint").get<std::string>();
    return r;
}

}  // namespace detail

// Append-only JSON-lines store of completed scoring units. Every line
// carries a checksum; a checksum mismatch on a complete line means the file
// was corrupted. A partial final line is an interrupted write and is
// dropped on load, which is what makes resume-after-kill safe.
class ScoreStore {
public:
    ScoreStore() = default;

    // Loads an existing store file; `path` must exist.
    static ScoreStore load(const std::string& path) {
        ScoreStore store;
        store.path_ = path;
        store.read_file();
        return store;
    }

    // Opens for a run: creates the file (with header) when absent or when
    // `fresh` is set; otherwise loads and insists the header matches.
    static ScoreStore open_for_run(const std::string& path, const RunHeader& header,
                                   bool fresh = false) {
        ScoreStore store;
        store.path_ = path;
        bool exists = std::filesystem::exists(path) &&
                      std::filesystem::file_size(path) > 0;
        if (exists && !fresh) {
            store.read_file();
            if (!store.header_) {
                // Only a torn header line was present; start over.
                store.initialize(header);
                return store;
            }
            if (store.header_->config_fingerprint != header.config_fingerprint) {
                throw ConfigError(
                    "score store '" + path + "' belongs to a different run configuration (" +
                    store.header_->config_fingerprint + " != " + header.config_fingerprint +
                    "); pass --fresh to discard it");
            }
            store.out_.open(path, std::ios::binary | std::ios::app);
            if (!store.out_) throw DataError("cannot open '" + path + "' for appending");
            return store;
        }
        store.initialize(header);
        return store;
    }

    const std::optional<RunHeader>& header() const { return header_; }

    bool has_profile() const { return profile_.has_value(); }
    const ZeroShotProfile& profile() const {
        if (!profile_) throw DataError("score store has no zero-shot profile yet");
        return *profile_;
    }

    void put_profile(const ZeroShotProfile& profile) {
        if (profile_) return;  // cached already
        profile_ = profile;
        append_line(detail::profile_to_json(profile));
    }

    bool has_row(const std::string& candidate_id) const {
        return completed_.count(candidate_id) > 0;
    }

    // Single-writer: the scoring orchestrator serializes appends.
    void append_row(const OneShotRow& row) {
        if (completed_.count(row.candidate_id)) return;
        rows_.push_back(row);
        completed_.insert(row.candidate_id);
        append_line(detail::row_to_json(row));
    }

    const std::vector<OneShotRow>& rows() const { return rows_; }
    std::size_t dropped_partial_lines() const { return dropped_partial_; }

    // Deterministic serialization: rows sorted by candidate id, checksums
    // stripped. Two runs with identical results have identical canonical
    // text regardless of completion order.
    std::string canonical_text() const {
        nlohmann::json j;
        j["header"] = header_ ? detail::header_to_json(*header_) : nlohmann::json();
        j["profile"] = profile_ ? detail::profile_to_json(*profile_) : nlohmann::json();
        std::vector<const OneShotRow*> sorted;
        sorted.reserve(rows_.size());
        for (const auto& r : rows_) sorted.push_back(&r);
        std::sort(sorted.begin(), sorted.end(), [](const OneShotRow* a, const OneShotRow* b) {
            return id_less(a->candidate_id, b->candidate_id);
        });
        nlohmann::json rows = nlohmann::json::array();
        for (const OneShotRow* r : sorted) rows.push_back(detail::row_to_json(*r));
        j["rows"] = std::move(rows);
        return j.dump(2);
    }

    // Golden scores for every completed row, sorted by candidate id.
    GoldenScoreTable build_table() const {
        if (!header_) throw DataError("score store has no header");
        GoldenScoreTable table;
        table.run_config_fingerprint = header_->config_fingerprint;
        table.records.reserve(rows_.size());
        for (const auto& row : rows_) {
            table.records.push_back(golden_score(row, profile(), header_->tie_epsilon));
        }
        std::sort(table.records.begin(), table.records.end(),
                  [](const GoldenScoreRecord& a, const GoldenScoreRecord& b) {
                      return id_less(a.candidate_id, b.candidate_id);
                  });
        return table;
    }

    const std::string& path() const { return path_; }

private:
    void initialize(const RunHeader& header) {
        out_.open(path_, std::ios::binary | std::ios::trunc);
        if (!out_) throw DataError("cannot open '" + path_ + "' for writing");
        header_ = header;
        rows_.clear();
        completed_.clear();
        profile_.reset();
        append_line(detail::header_to_json(header));
    }

    void append_line(nlohmann::json obj) {
        obj["checksum"] = detail::line_checksum(obj);
        out_ << obj.dump() << "\n";
        out_.flush();
        if (!out_) throw DataError("failed writing score store '" + path_ + "'");
    }

    void read_file() {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw DataError("cannot open score store '" + path_ + "'");
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());

        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos < content.size()) {
            std::size_t nl = content.find('\n', pos);
            bool terminated = nl != std::string::npos;
            std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
            pos = terminated ? nl + 1 : content.size();
            ++line_no;
            if (trim(line).empty()) continue;

            nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
            if (obj.is_discarded()) {
                if (!terminated) {
                    ++dropped_partial_;  // torn final write
                    break;
                }
                throw DataError("score store '" + path_ + "' line " + std::to_string(line_no) +
                                ": unparseable record");
            }
            if (!obj.contains("checksum") ||
                obj.at("checksum").get<std::string>() != detail::line_checksum(obj)) {
                if (!terminated) {
                    ++dropped_partial_;
                    break;
                }
                throw DataError("score store '" + path_ + "' line " + std::to_string(line_no) +
                                ": checksum mismatch (file is corrupt)");
            }

            const std::string type = obj.value("type", "");
            if (type == "header") {
                RunHeader h;
                h.config_fingerprint = obj.at("config_fingerprint").get<std::string>();
                h.anchor_fingerprint = obj.at("anchor_fingerprint").get<std::string>();
                h.backend_descriptor = obj.at("backend_descriptor").get<std::string>();
                h.policy = obj.at("policy").get<std::string>();
                h.tie_epsilon = obj.at("tie_epsilon").get<double>();
                h.m = obj.at("m").get<std::size_t>();
                header_ = h;
            } else if (type == "profile") {
                ZeroShotProfile p;
                p.scores = obj.at("scores").get<std::vector<double>>();
                p.anchor_fingerprint = obj.at("anchor_fingerprint").get<std::string>();
                p.backend_fingerprint = obj.at("backend_fingerprint").get<std::string>();
                profile_ = std::move(p);
            } else if (type == "row") {
                OneShotRow row = detail::row_from_json(obj);
                completed_.insert(row.candidate_id);
                rows_.push_back(std::move(row));
            } else {
                throw DataError("score store '" + path_ + "' line " + std::to_string(line_no) +
                                ": unknown record type '" + type + "'");
            }
        }
    }

    std::string path_;
    std::ofstream out_;
    std::optional<RunHeader> header_;
    std::optional<ZeroShotProfile> profile_;
    std::vector<OneShotRow> rows_;
    std::unordered_set<std::string> completed_;
    std::size_t dropped_partial_ = 0;
};

}  // namespace goldsift
