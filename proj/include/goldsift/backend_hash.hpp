#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "goldsift/backend.hpp"
#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"
#include "goldsift/tokenize.hpp"

namespace goldsift {

// Deterministic feature-hashing embedder: each whitespace token is hashed to
// a bucket with a +/-1 sign. Stable across processes and platforms.
class FeatureHashEmbedder {
public:
    explicit FeatureHashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0)
        : dim_(dim), seed_(seed) {}

    std::size_t dim() const { return dim_; }

    std::vector<double> embed(const std::string& text) const {
        if (text.empty()) {
            throw DataError("cannot embed empty text");
        }
        std::vector<double> values(dim_, 0.0);
        for (const Token& tok : whitespace_tokenize(text)) {
            std::uint64_t h = fnv1a64(tok.text, fnv1a64_u64(seed_));
            std::size_t bucket = static_cast<std::size_t>(h % dim_);
            double sign = ((h >> 63) & 1u) ? -1.0 : 1.0;
            values[bucket] += sign;
        }
        return values;
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Seeded mock backend for integration tests. The logprob of token t is a
// pure function of (seed, rolling hash of the entire preceding context, the
// previous 4 tokens, t), mapped into [-3.0, -0.01]. Carrying the full-context
// rolling hash means a prepended demonstration shifts every downstream token
// logprob, so one-shot and zero-shot scores genuinely differ.
//
// The exact rule, which tests reimplement independently:
//   state_0   = fnv1a64_u64(seed)
//   state_j+1 = fnv1a64(token_j, fnv1a64("\x1f", state_j))
//   h_i       = state_i, then absorb tokens i-4..i-1 (each after "\x1f"),
//               then "\x1e", then token_i
//   u_i       = top 53 bits of h_i scaled to [0, 1)
//   logprob_i = -0.01 - 2.99 * u_i
class HashMockBackend : public Backend {
public:
    explicit HashMockBackend(std::uint64_t seed, std::size_t context_budget = 2048)
        : seed_(seed), context_budget_(context_budget) {}

    std::uint64_t seed() const { return seed_; }

    std::string descriptor() const override {
        nlohmann::json j;
        j["kind"] = "hash-mock";
        j["seed"] = seed_;
        j["context_budget"] = context_budget_;
        return j.dump();
    }

    std::size_t count_tokens(const std::string& text) const override {
        return whitespace_token_count(text);
    }

    std::size_t context_budget() const override { return context_budget_; }

    ScoredSpan score_span(const ScoreRequest& request) override {
        ensure_within_budget(*this, request);
        const std::string joint = request.prefix + request.target;
        std::vector<Token> tokens = whitespace_tokenize(joint);
        detail::SpanSplit split = detail::split_at_boundary(tokens, request.prefix.size());

        std::vector<double> all = token_logprobs(tokens);
        ScoredSpan span;
        span.prefix_token_count = split.prefix_token_count;
        span.token_logprobs.assign(all.begin() + static_cast<std::ptrdiff_t>(split.first_target_token),
                                   all.end());
        span.validate();
        return span;
    }

    std::vector<double> embed(const std::string& text) override {
        return FeatureHashEmbedder(embed_dim_, seed_).embed(text);
    }

    void set_embed_dim(std::size_t dim) { embed_dim_ = dim; }

    // Logprobs for every token of an already-tokenized text, in order.
    std::vector<double> token_logprobs(const std::vector<Token>& tokens) const {
        std::vector<double> out;
        out.reserve(tokens.size());
        std::uint64_t state = fnv1a64_u64(seed_);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            std::uint64_t h = state;
            std::size_t window_begin = i >= 4 ? i - 4 : 0;
            for (std::size_t k = window_begin; k < i; ++k) {
                h = fnv1a64(tokens[k].text, fnv1a64("\x1f", h));
            }
            h = fnv1a64(tokens[i].text, fnv1a64("\x1e", h));
            out.push_back(map_to_logprob(h));
            state = fnv1a64(tokens[i].text, fnv1a64("\x1f", state));
        }
        return out;
    }

    static double map_to_logprob(std::uint64_t h) {
        double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        return -0.01 - 2.99 * u;
    }

private:
    std::uint64_t seed_;
    std::size_t context_budget_;
    std::size_t embed_dim_ = 64;
};

}  // namespace goldsift
