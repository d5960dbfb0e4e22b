#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "goldsift/errors.hpp"
#include "goldsift/tokenize.hpp"

namespace goldsift {

// The conditioning context plus the ground-truth continuation to score.
struct ScoreRequest {
    std::string prefix;
    std::string target;
};

// Per-token log-probabilities (natural log) of a scored target span.
struct ScoredSpan {
    std::vector<double> token_logprobs;
    std::size_t prefix_token_count = 0;

    std::size_t token_count() const { return token_logprobs.size(); }

    // The s-score for this (prefix, target) pair.
    double mean_logprob() const {
        double sum = 0.0;
        for (double lp : token_logprobs) sum += lp;
        return sum / static_cast<double>(token_logprobs.size());
    }

    void validate() const {
        if (token_logprobs.empty()) {
            throw BackendError(BackendError::Kind::SpanAlignment,
                               "scored span contains no target tokens");
        }
        for (double lp : token_logprobs) {
            if (!std::isfinite(lp) || lp > 0.0) {
                throw BackendError(BackendError::Kind::SpanAlignment,
                                   "token logprob out of range: " + std::to_string(lp));
            }
        }
    }
};

struct RetryPolicy {
    int max_attempts = 3;
    int initial_backoff_ms = 1000;
    double multiplier = 2.0;
};

// A log-probability oracle. Implementations must be deterministic functions
// of (request, configuration) and safe for concurrent score_span calls.
class Backend {
public:
    virtual ~Backend() = default;

    // Human/machine-readable description of the configuration, without
    // secrets; feeds the run fingerprint.
    virtual std::string descriptor() const = 0;

    // Token count under this backend's token model (estimate is acceptable
    // for remote backends; used only for the context budget check).
    virtual std::size_t count_tokens(const std::string& text) const = 0;

    virtual std::size_t context_budget() const = 0;

    virtual ScoredSpan score_span(const ScoreRequest& request) = 0;

    virtual std::vector<double> embed(const std::string& text) {
        (void)text;
        throw BackendError(BackendError::Kind::NotSupported,
                           "this backend does not provide embeddings");
    }
};

inline bool fits_budget(const Backend& backend, const std::string& prefix,
                        const std::string& target) {
    return backend.count_tokens(prefix + target) <= backend.context_budget();
}

inline void ensure_within_budget(const Backend& backend, const ScoreRequest& request) {
    if (request.target.empty()) {
        throw BackendError(BackendError::Kind::SpanAlignment, "score target is empty");
    }
    if (!fits_budget(backend, request.prefix, request.target)) {
        throw BackendError(BackendError::Kind::ContextOverflow,
                           "prefix+target exceeds the context budget of " +
                               std::to_string(backend.context_budget()) + " tokens");
    }
}

namespace detail {

// Splits jointly tokenized text at a character boundary. A token straddling
// the boundary is attributed to the target so no answer mass is dropped.
struct SpanSplit {
    std::size_t first_target_token = 0;  // index into the joint token list
    std::size_t prefix_token_count = 0;  // tokens entirely before the boundary
};

inline SpanSplit split_at_boundary(const std::vector<Token>& joint_tokens,
                                   std::size_t boundary) {
    SpanSplit split;
    std::size_t i = 0;
    while (i < joint_tokens.size() && joint_tokens[i].end <= boundary) ++i;
    split.first_target_token = i;
    split.prefix_token_count = i;
    if (i == joint_tokens.size()) {
        throw BackendError(BackendError::Kind::SpanAlignment,
                           "no tokens fall inside the target span");
    }
    return split;
}

}  // namespace detail

}  // namespace goldsift
