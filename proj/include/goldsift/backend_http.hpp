#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
// httplib pulls in <resolv.h>, whose `_res` macro mangles unrelated headers
// (Eigen among them) in any later include. httplib itself never uses it.
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include "goldsift/backend.hpp"
#include "goldsift/errors.hpp"

namespace goldsift {

// Wire contract for any OpenAI-compatible completions server that can echo
// the prompt with per-token logprobs and text offsets. Field names and the
// endpoint path are configurable for near-compatible servers.
struct HttpBackendConfig {
    std::string base_url = "http://localhost:8000";
    std::string completions_path = "/v1/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::string model;
    std::string api_key_env;  // name of the env var holding the key; never the key itself

    std::size_t context_budget = 2048;
    double chars_per_token = 4.0;  // pre-dispatch budget estimate
    int timeout_seconds = 120;
    int parallelism = 4;  // advisory; the orchestrator enforces the bound
    RetryPolicy retry;

    // request fields
    std::string prompt_field = "prompt";
    std::string echo_field = "echo";
    std::string logprobs_field = "logprobs";
    std::string max_tokens_field = "max_tokens";

    // response fields
    std::string choices_key = "choices";
    std::string logprobs_key = "logprobs";
    std::string tokens_key = "tokens";
    std::string token_logprobs_key = "token_logprobs";
    std::string text_offset_key = "text_offset";

    // test hook; defaults to a real sleep
    std::function<void(int ms)> sleep_fn;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
        if (config_.chars_per_token <= 0.0) {
            throw ConfigError("chars_per_token must be positive");
        }
    }

    std::string descriptor() const override {
        nlohmann::json j;
        j["kind"] = "http";
        j["base_url"] = config_.base_url;
        j["completions_path"] = config_.completions_path;
        j["model"] = config_.model;
        j["context_budget"] = config_.context_budget;
        j["chars_per_token"] = config_.chars_per_token;
        return j.dump();
    }

    std::size_t count_tokens(const std::string& text) const override {
        return static_cast<std::size_t>(
            std::ceil(static_cast<double>(text.size()) / config_.chars_per_token));
    }

    std::size_t context_budget() const override { return config_.context_budget; }

    ScoredSpan score_span(const ScoreRequest& request) override {
        ensure_within_budget(*this, request);

        nlohmann::json body;
        body["model"] = config_.model;
        body[config_.prompt_field] = request.prefix + request.target;
        body[config_.max_tokens_field] = 0;
        body[config_.echo_field] = true;
        body[config_.logprobs_field] = 0;
        body["temperature"] = 0;

        nlohmann::json payload = post_with_retries(config_.completions_path, body.dump());
        return extract_span(payload, request);
    }

    std::vector<double> embed(const std::string& text) override {
        if (text.empty()) throw DataError("cannot embed empty text");
        nlohmann::json body;
        body["model"] = config_.model;
        body["input"] = text;

        nlohmann::json payload = post_with_retries(config_.embeddings_path, body.dump());
        std::vector<double> values;
        try {
            values = payload.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& ex) {
            throw BackendError(BackendError::Kind::Unavailable,
                               std::string("malformed embedding response: ") + ex.what());
        }
        for (double v : values) {
            if (!std::isfinite(v)) {
                throw BackendError(BackendError::Kind::Unavailable,
                                   "embedding contains non-finite values");
            }
        }

        std::lock_guard<std::mutex> lock(dim_mutex_);
        if (!embed_dim_) {
            embed_dim_ = values.size();
        } else if (*embed_dim_ != values.size()) {
            throw BackendError(BackendError::Kind::DimensionDrift,
                               "embedding dimension changed from " +
                                   std::to_string(*embed_dim_) + " to " +
                                   std::to_string(values.size()) + " within one run");
        }
        return values;
    }

private:
    nlohmann::json post_with_retries(const std::string& path, const std::string& body) {
        httplib::Headers headers{{"Content-Type", "application/json"}};
        if (!config_.api_key_env.empty()) {
            if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }

        int backoff_ms = config_.retry.initial_backoff_ms;
        std::string last_failure = "no attempt made";
        for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
            // A client per request keeps concurrent in-flight calls isolated.
            httplib::Client client(config_.base_url);
            client.set_connection_timeout(config_.timeout_seconds, 0);
            client.set_read_timeout(config_.timeout_seconds, 0);

            httplib::Result res = client.Post(path, headers, body, "application/json");
            if (res && res->status < 400) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception& ex) {
                    throw BackendError(BackendError::Kind::Unavailable,
                                       std::string("unparseable backend response: ") + ex.what());
                }
            }

            bool retryable;
            if (!res) {
                last_failure = "transport error: " + httplib::to_string(res.error());
                retryable = true;
            } else {
                last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body;
                retryable = res->status >= 500;
            }
            if (!retryable || attempt == config_.retry.max_attempts) break;

            if (config_.sleep_fn) {
                config_.sleep_fn(backoff_ms);
            } else {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            }
            backoff_ms = static_cast<int>(backoff_ms * config_.retry.multiplier);
        }
        throw BackendError(BackendError::Kind::Unavailable,
                           "backend unavailable after " +
                               std::to_string(config_.retry.max_attempts) +
                               " attempts; last failure: " + last_failure);
    }

    ScoredSpan extract_span(const nlohmann::json& payload, const ScoreRequest& request) const {
        const nlohmann::json* lp = nullptr;
        try {
            lp = &payload.at(config_.choices_key).at(0).at(config_.logprobs_key);
        } catch (const nlohmann::json::exception&) {
            throw BackendError(BackendError::Kind::SpanAlignment,
                               "response carries no logprobs block; the server must support "
                               "echoed per-token logprobs");
        }
        if (!lp->contains(config_.token_logprobs_key) ||
            !lp->contains(config_.text_offset_key)) {
            throw BackendError(BackendError::Kind::SpanAlignment,
                               "logprobs block lacks token_logprobs or text_offset");
        }

        const auto& logprobs = lp->at(config_.token_logprobs_key);
        const auto& offsets = lp->at(config_.text_offset_key);
        if (!logprobs.is_array() || !offsets.is_array() || logprobs.size() != offsets.size() ||
            offsets.empty()) {
            throw BackendError(BackendError::Kind::SpanAlignment,
                               "token_logprobs and text_offset must be equal-length arrays");
        }

        const std::size_t boundary = request.prefix.size();
        const std::size_t total = boundary + request.target.size();
        const std::size_t n = offsets.size();

        ScoredSpan span;
        bool covered_end = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t begin = offsets.at(i).get<std::size_t>();
            std::size_t end = (i + 1 < n) ? offsets.at(i + 1).get<std::size_t>() : total;
            if (end <= boundary) {
                span.prefix_token_count += 1;
                continue;
            }
            // Tokens straddling the boundary count toward the target.
            if (logprobs.at(i).is_null()) {
                throw BackendError(BackendError::Kind::SpanAlignment,
                                   "target token " + std::to_string(i) +
                                       " came back without a logprob");
            }
            span.token_logprobs.push_back(logprobs.at(i).get<double>());
            if (end >= total) covered_end = true;
        }
        if (span.token_logprobs.empty() || !covered_end) {
            throw BackendError(BackendError::Kind::SpanAlignment,
                               "returned offsets do not cover the target span");
        }
        span.validate();
        return span;
    }

    HttpBackendConfig config_;
    std::mutex dim_mutex_;
    std::optional<std::size_t> embed_dim_;
};

}  // namespace goldsift
