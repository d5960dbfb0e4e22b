#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"
#include "goldsift/tokenize.hpp"

namespace goldsift {

using ordered_json = nlohmann::ordered_json;

enum class ExampleFlag : unsigned {
    None = 0,
    EmptyOutput = 1u << 0,
};

inline unsigned operator|(ExampleFlag a, ExampleFlag b) {
    return static_cast<unsigned>(a) | static_cast<unsigned>(b);
}

// One candidate instruction record, normalized for scoring. The raw JSON
// object is kept verbatim on the owning Dataset so exports can round-trip
// field-for-field.
struct InstructionExample {
    std::string id;
    std::string instruction;
    std::string input;   // empty when the record has no input
    std::string answer;  // the record's output; may be empty (flagged)
    unsigned flags = 0;

    bool has_flag(ExampleFlag f) const { return (flags & static_cast<unsigned>(f)) != 0; }
    bool empty_output() const { return has_flag(ExampleFlag::EmptyOutput); }
};

enum class DatasetFormat {
    Auto,
    JsonArray,
    JsonLines,
};

enum class IdPolicy {
    Sequential,   // zero-based file order; explicit `id` fields override per record
    ContentHash,  // hash of instruction/input/output (for dedup studies)
};

struct LoadOptions {
    DatasetFormat format = DatasetFormat::Auto;
    IdPolicy id_policy = IdPolicy::Sequential;
    bool skip_bad = false;  // downgrade malformed records to warnings
};

struct LoadIssue {
    std::size_t record_index = 0;
    std::string reason;
};

struct Dataset {
    std::vector<InstructionExample> examples;
    std::vector<ordered_json> raw_records;  // parallel to examples
    std::vector<LoadIssue> skipped;         // populated only under skip_bad
    std::string source_path;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }

    const InstructionExample* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &examples[it->second];
    }

    const ordered_json* find_raw(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &raw_records[it->second];
    }

    void rebuild_index() {
        index_.clear();
        index_.reserve(examples.size());
        for (std::size_t i = 0; i < examples.size(); ++i) {
            auto [it, inserted] = index_.emplace(examples[i].id, i);
            if (!inserted) {
                throw DataError("duplicate example id '" + examples[i].id + "'");
            }
        }
    }

    // Content fingerprint over the raw records, independent of source path.
    std::string content_fingerprint() const {
        std::uint64_t h = kFnvOffset;
        for (const auto& rec : raw_records) {
            h = fnv1a64(rec.dump(), h);
            h = fnv1a64("\n", h);
        }
        return to_hex(h);
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

// Ascending-id order. Ids that are plain non-negative integers compare
// numerically so sequential ids sort as expected; everything else is
// lexicographic, with numeric ids ordered before non-numeric ones.
inline bool id_less(const std::string& a, const std::string& b) {
    auto as_number = [](const std::string& s) -> std::optional<unsigned long long> {
        if (s.empty() || s.size() > 18) return std::nullopt;
        for (char c : s) {
            if (c < '0' || c > '9') return std::nullopt;
        }
        return std::stoull(s);
    };
    auto na = as_number(a);
    auto nb = as_number(b);
    if (na && nb) return *na < *nb;
    if (na != nb) return na.has_value();  // numeric ids first
    return a < b;
}

namespace detail {

inline std::string json_to_text(const ordered_json& value, const char* field) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    throw DataError(std::string("field '") + field + "' is not a string");
}

inline InstructionExample normalize_record(const ordered_json& rec, std::size_t index,
                                           IdPolicy id_policy) {
    if (!rec.is_object()) {
        throw DataError("record is not a JSON object");
    }
    if (!rec.contains("instruction")) {
        throw DataError("missing required field 'instruction'");
    }

    InstructionExample ex;
    ex.instruction = json_to_text(rec.at("instruction"), "instruction");
    if (trim(ex.instruction).empty()) {
        throw DataError("field 'instruction' is empty");
    }
    if (rec.contains("input") && !rec.at("input").is_null()) {
        ex.input = json_to_text(rec.at("input"), "input");
    }
    if (rec.contains("output") && !rec.at("output").is_null()) {
        ex.answer = json_to_text(rec.at("output"), "output");
    }
    if (trim(ex.answer).empty()) {
        ex.flags |= static_cast<unsigned>(ExampleFlag::EmptyOutput);
    }

    if (rec.contains("id")) {
        ex.id = json_to_text(rec.at("id"), "id");
    } else if (id_policy == IdPolicy::ContentHash) {
        std::uint64_t h = fnv1a64(ex.instruction);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(ex.input, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(ex.answer, h);
        ex.id = to_hex(h);
    } else {
        ex.id = std::to_string(index);
    }
    return ex;
}

inline DatasetFormat sniff_format(const std::string& path, const std::string& text) {
    if (path.ends_with(".jsonl") || path.ends_with(".ndjson")) return DatasetFormat::JsonLines;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        return c == '[' ? DatasetFormat::JsonArray : DatasetFormat::JsonLines;
    }
    return DatasetFormat::JsonArray;
}

}  // namespace detail

inline Dataset parse_dataset(const std::string& text, const LoadOptions& opts = {},
                             const std::string& source_path = "") {
    Dataset ds;
    ds.source_path = source_path;

    std::vector<ordered_json> records;
    DatasetFormat format = opts.format == DatasetFormat::Auto
                               ? detail::sniff_format(source_path, text)
                               : opts.format;

    if (format == DatasetFormat::JsonArray) {
        ordered_json root;
        try {
            root = ordered_json::parse(text);
        } catch (const nlohmann::json::exception& ex) {
            throw DataError(std::string("cannot parse JSON array: ") + ex.what());
        }
        if (!root.is_array()) {
            throw DataError("expected a top-level JSON array of records");
        }
        records.assign(root.begin(), root.end());
    } else {
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            try {
                records.push_back(ordered_json::parse(line));
            } catch (const nlohmann::json::exception& ex) {
                std::string reason = "line " + std::to_string(line_no) + ": " + ex.what();
                if (opts.skip_bad) {
                    ds.skipped.push_back({records.size(), reason});
                    continue;
                }
                throw DataError("malformed record at " + reason);
            }
        }
    }

    ds.examples.reserve(records.size());
    ds.raw_records.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            InstructionExample ex = detail::normalize_record(records[i], ds.examples.size(),
                                                             opts.id_policy);
            ds.examples.push_back(std::move(ex));
            ds.raw_records.push_back(records[i]);
        } catch (const DataError& err) {
            if (opts.skip_bad) {
                ds.skipped.push_back({i, err.what()});
                continue;
            }
            throw DataError("record " + std::to_string(i) + ": " + err.what());
        }
    }

    ds.rebuild_index();
    return ds;
}

inline Dataset load_dataset(const std::string& path, const LoadOptions& opts = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open dataset file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), opts, path);
}

// Writes raw records in the given order. `ids` must all resolve.
inline void write_records(const Dataset& ds, const std::vector<std::string>& ids,
                          const std::string& path, DatasetFormat format = DatasetFormat::JsonArray) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open '" + path + "' for writing");
    }
    if (format == DatasetFormat::Auto) {
        format = path.ends_with(".jsonl") ? DatasetFormat::JsonLines : DatasetFormat::JsonArray;
    }
    if (format == DatasetFormat::JsonArray) {
        ordered_json arr = ordered_json::array();
        for (const auto& id : ids) {
            const ordered_json* raw = ds.find_raw(id);
            if (!raw) throw DataError("unknown example id '" + id + "'");
            arr.push_back(*raw);
        }
        out << arr.dump(2) << "\n";
    } else {
        for (const auto& id : ids) {
            const ordered_json* raw = ds.find_raw(id);
            if (!raw) throw DataError("unknown example id '" + id + "'");
            out << raw->dump() << "\n";
        }
    }
    if (!out) {
        throw DataError("failed writing '" + path + "'");
    }
}

}  // namespace goldsift
