#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "goldsift/backend.hpp"
#include "goldsift/backend_hash.hpp"
#include "goldsift/backend_http.hpp"
#include "goldsift/backend_table.hpp"
#include "goldsift/dataset.hpp"
#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"
#include "goldsift/scoring.hpp"

namespace goldsift {

// Which scoring backend to construct. The CLI shorthand is
// "hash:<seed>", "table:<file>" or "http:<base-url>"; the config file may
// instead carry a full JSON object.
struct BackendSpec {
    std::string kind;  // "hash-mock" | "table" | "http"
    std::uint64_t seed = 0;
    std::string table_path;
    std::size_t context_budget = 2048;
    HttpBackendConfig http;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = kind;
        j["context_budget"] = context_budget;
        if (kind == "hash-mock") {
            j["seed"] = seed;
        } else if (kind == "table") {
            j["table_path"] = table_path;
        } else if (kind == "http") {
            j["base_url"] = http.base_url;
            j["completions_path"] = http.completions_path;
            j["embeddings_path"] = http.embeddings_path;
            j["model"] = http.model;
            j["api_key_env"] = http.api_key_env;
            j["chars_per_token"] = http.chars_per_token;
            j["timeout_seconds"] = http.timeout_seconds;
        }
        return j;
    }
};

inline BackendSpec parse_backend_arg(const std::string& arg) {
    BackendSpec spec;
    auto colon = arg.find(':');
    std::string head = colon == std::string::npos ? arg : arg.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : arg.substr(colon + 1);

    if (head == "hash" || head == "hash-mock") {
        spec.kind = "hash-mock";
        if (!rest.empty()) {
            try {
                spec.seed = std::stoull(rest);
            } catch (const std::exception&) {
                throw ConfigError("hash backend seed must be an integer, got '" + rest + "'");
            }
        }
        return spec;
    }
    if (head == "table") {
        if (rest.empty()) throw ConfigError("table backend needs a file: table:<path>");
        spec.kind = "table";
        spec.table_path = rest;
        return spec;
    }
    if (head == "http" || head == "https") {
        if (rest.empty()) throw ConfigError("http backend needs a URL: http:<base-url>");
        spec.kind = "http";
        // "http:http://host:1234" and "http://host:1234" both work
        spec.http.base_url = rest.starts_with("http") ? rest : head + ":" + rest;
        return spec;
    }
    throw ConfigError("unknown backend '" + arg +
                      "' (expected hash:<seed> | table:<file> | http:<base-url>)");
}

inline BackendSpec backend_spec_from_json(const nlohmann::json& j) {
    if (j.is_string()) return parse_backend_arg(j.get<std::string>());
    if (!j.is_object() || !j.contains("kind")) {
        throw ConfigError("backend config must be a shorthand string or an object with 'kind'");
    }
    BackendSpec spec;
    spec.kind = j.at("kind").get<std::string>();
    spec.context_budget = j.value("context_budget", std::size_t{2048});
    if (spec.kind == "hash-mock") {
        spec.seed = j.value("seed", std::uint64_t{0});
    } else if (spec.kind == "table") {
        spec.table_path = j.value("table_path", std::string{});
        if (spec.table_path.empty()) throw ConfigError("table backend needs 'table_path'");
    } else if (spec.kind == "http") {
        spec.http.base_url = j.value("base_url", spec.http.base_url);
        spec.http.completions_path = j.value("completions_path", spec.http.completions_path);
        spec.http.embeddings_path = j.value("embeddings_path", spec.http.embeddings_path);
        spec.http.model = j.value("model", spec.http.model);
        spec.http.api_key_env = j.value("api_key_env", spec.http.api_key_env);
        spec.http.chars_per_token = j.value("chars_per_token", spec.http.chars_per_token);
        spec.http.timeout_seconds = j.value("timeout_seconds", spec.http.timeout_seconds);
    } else {
        throw ConfigError("unknown backend kind '" + spec.kind + "'");
    }
    return spec;
}

inline std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
    if (spec.kind == "hash-mock") {
        return std::make_unique<HashMockBackend>(spec.seed, spec.context_budget);
    }
    if (spec.kind == "table") {
        return std::make_unique<TableBackend>(
            load_table_backend(spec.table_path, spec.context_budget));
    }
    if (spec.kind == "http") {
        HttpBackendConfig http = spec.http;
        http.context_budget = spec.context_budget;
        return std::make_unique<HttpBackend>(std::move(http));
    }
    throw ConfigError("unknown backend kind '" + spec.kind + "'");
}

// Resolved settings for a scoring run. Serializes canonically (sorted
// keys), so the fingerprint is stable under field reordering.
struct RunConfig {
    std::string dataset_path;
    DatasetFormat dataset_format = DatasetFormat::Auto;
    std::string template_path;  // empty = built-in default template
    std::string anchors_path;
    BackendSpec backend;
    std::string overflow_policy = "fixed-m";
    double tie_epsilon = 0.0;
    std::string store_path;
    int parallelism = 1;
    bool exclude_anchors = false;

    nlohmann::json to_canonical_json() const {
        nlohmann::json j;
        j["dataset_path"] = dataset_path;
        j["dataset_format"] = dataset_format == DatasetFormat::JsonArray  ? "json-array"
                              : dataset_format == DatasetFormat::JsonLines ? "jsonl"
                                                                           : "auto";
        j["template_path"] = template_path;
        j["anchors_path"] = anchors_path;
        j["backend"] = backend.to_json();
        j["overflow_policy"] = overflow_policy;
        j["tie_epsilon"] = tie_epsilon;
        j["store_path"] = store_path;
        j["parallelism"] = parallelism;
        j["exclude_anchors"] = exclude_anchors;
        return j;
    }

    std::string fingerprint() const { return goldsift::fingerprint(to_canonical_json().dump()); }
};

inline DatasetFormat parse_dataset_format(const std::string& name) {
    if (name == "auto" || name.empty()) return DatasetFormat::Auto;
    if (name == "json-array" || name == "json") return DatasetFormat::JsonArray;
    if (name == "jsonl" || name == "json-lines") return DatasetFormat::JsonLines;
    throw ConfigError("unknown dataset format '" + name + "' (auto | json-array | jsonl)");
}

// Config file: a JSON object whose fields mirror the score-run flags.
// Flags given on the command line win over the file.
inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("cannot parse config file '" + path + "': " + ex.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");

    RunConfig cfg;
    cfg.dataset_path = j.value("dataset_path", std::string{});
    cfg.dataset_format = parse_dataset_format(j.value("dataset_format", std::string{"auto"}));
    cfg.template_path = j.value("template_path", std::string{});
    cfg.anchors_path = j.value("anchors_path", std::string{});
    if (j.contains("backend")) cfg.backend = backend_spec_from_json(j.at("backend"));
    cfg.overflow_policy = j.value("overflow_policy", cfg.overflow_policy);
    cfg.tie_epsilon = j.value("tie_epsilon", cfg.tie_epsilon);
    cfg.store_path = j.value("store_path", std::string{});
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    cfg.exclude_anchors = j.value("exclude_anchors", cfg.exclude_anchors);
    overflow_policy_from_name(cfg.overflow_policy);  // validate early
    return cfg;
}

}  // namespace goldsift
