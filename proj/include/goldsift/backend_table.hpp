#pragma once

#include <bit>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "goldsift/backend.hpp"
#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"
#include "goldsift/tokenize.hpp"

namespace goldsift {

// Fixture backend: an explicit (prefix, target) -> logprobs map for unit
// tests. Entries without a prefix match any prefix for that target.
class TableBackend : public Backend {
public:
    explicit TableBackend(std::size_t context_budget = 2048)
        : context_budget_(context_budget) {}

    void add(const std::string& prefix, const std::string& target,
             std::vector<double> logprobs) {
        exact_[key(prefix, target)] = std::move(logprobs);
    }

    void add_for_target(const std::string& target, std::vector<double> logprobs) {
        by_target_[target] = std::move(logprobs);
    }

    void set_embedding(const std::string& text, std::vector<double> values) {
        embeddings_[text] = std::move(values);
    }

    std::string descriptor() const override {
        nlohmann::json j;
        j["kind"] = "table";
        j["context_budget"] = context_budget_;
        std::uint64_t h = kFnvOffset;
        for (const auto& [k, v] : exact_) {
            h = fnv1a64(k, h);
            for (double lp : v) h = fnv1a64_u64(std::bit_cast<std::uint64_t>(lp), h);
        }
        for (const auto& [k, v] : by_target_) {
            h = fnv1a64(k, h);
            for (double lp : v) h = fnv1a64_u64(std::bit_cast<std::uint64_t>(lp), h);
        }
        j["table_fingerprint"] = to_hex(h);
        return j.dump();
    }

    std::size_t count_tokens(const std::string& text) const override {
        return whitespace_token_count(text);
    }

    std::size_t context_budget() const override { return context_budget_; }

    ScoredSpan score_span(const ScoreRequest& request) override {
        ensure_within_budget(*this, request);
        const std::vector<double>* logprobs = nullptr;
        if (auto it = exact_.find(key(request.prefix, request.target)); it != exact_.end()) {
            logprobs = &it->second;
        } else if (auto it2 = by_target_.find(request.target); it2 != by_target_.end()) {
            logprobs = &it2->second;
        }
        if (!logprobs) {
            throw BackendError(BackendError::Kind::Unavailable,
                               "no table entry for target '" + request.target + "'");
        }
        ScoredSpan span;
        span.token_logprobs = *logprobs;
        span.prefix_token_count = whitespace_token_count(request.prefix);
        span.validate();
        return span;
    }

    std::vector<double> embed(const std::string& text) override {
        auto it = embeddings_.find(text);
        if (it == embeddings_.end()) {
            throw BackendError(BackendError::Kind::Unavailable,
                               "no embedding table entry for text");
        }
        return it->second;
    }

private:
    static std::string key(const std::string& prefix, const std::string& target) {
        return prefix + '\x1f' + target;
    }

    std::map<std::string, std::vector<double>> exact_;
    std::map<std::string, std::vector<double>> by_target_;
    std::map<std::string, std::vector<double>> embeddings_;
    std::size_t context_budget_;
};

// File format: JSON array of {"prefix"?: str, "target": str,
// "token_logprobs": [num, ...]}.
inline TableBackend load_table_backend(const std::string& path, std::size_t context_budget) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open table backend file '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("cannot parse table backend file: " + std::string(ex.what()));
    }
    if (!j.is_array()) {
        throw ConfigError("table backend file must be a JSON array of entries");
    }
    TableBackend backend(context_budget);
    for (const auto& entry : j) {
        if (!entry.is_object() || !entry.contains("target") ||
            !entry.contains("token_logprobs")) {
            throw ConfigError("table entry must have 'target' and 'token_logprobs'");
        }
        std::vector<double> logprobs = entry.at("token_logprobs").get<std::vector<double>>();
        if (entry.contains("prefix")) {
            backend.add(entry.at("prefix").get<std::string>(),
                        entry.at("target").get<std::string>(), std::move(logprobs));
        } else {
            backend.add_for_target(entry.at("target").get<std::string>(), std::move(logprobs));
        }
    }
    return backend;
}

}  // namespace goldsift
