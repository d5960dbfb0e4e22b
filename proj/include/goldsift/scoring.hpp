#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "goldsift/anchors.hpp"
#include "goldsift/backend.hpp"
#include "goldsift/dataset.hpp"
#include "goldsift/errors.hpp"
#include "goldsift/hash.hpp"
#include "goldsift/prompt.hpp"

namespace goldsift {

// What happens to a (candidate, anchor) pair whose prompt exceeds the
// context budget. The default keeps the denominator fixed at m for every
// candidate so scores stay comparable across the dataset.
enum class OverflowPolicy {
    CountAsNoImprovement,       // "fixed-m"
    SkipReducesM,               // "skip-reduces-m"
    TruncateDemonstrationLeft,  // "truncate-demonstration-left"
};

inline std::string overflow_policy_name(OverflowPolicy policy) {
    switch (policy) {
        case OverflowPolicy::CountAsNoImprovement: return "fixed-m";
        case OverflowPolicy::SkipReducesM: return "skip-reduces-m";
        case OverflowPolicy::TruncateDemonstrationLeft: return "truncate-demonstration-left";
    }
    throw ConfigError("unknown overflow policy");
}

inline OverflowPolicy overflow_policy_from_name(const std::string& name) {
    if (name == "fixed-m") return OverflowPolicy::CountAsNoImprovement;
    if (name == "skip-reduces-m") return OverflowPolicy::SkipReducesM;
    if (name == "truncate-demonstration-left") return OverflowPolicy::TruncateDemonstrationLeft;
    throw ConfigError("unknown overflow policy '" + name +
                      "' (expected fixed-m | skip-reduces-m | truncate-demonstration-left)");
}

// Per-anchor mean token logprobs of the anchor answers with no demonstration.
// Candidate-independent, so it is computed once per run.
struct ZeroShotProfile {
    std::vector<double> scores;
    std::string anchor_fingerprint;
    std::string backend_fingerprint;

    std::size_t m() const { return scores.size(); }
};

// One candidate's scores against every anchor. A disengaged entry is an
// overflowed pair (never a silently truncated one).
struct OneShotRow {
    std::string candidate_id;
    std::vector<std::optional<double>> scores;
    std::string policy_applied;
    std::vector<std::size_t> self_pairs;  // anchor positions sourced from this candidate
    std::string anchor_fingerprint;

    std::size_t m() const { return scores.size(); }

    std::size_t overflow_count() const {
        std::size_t n = 0;
        for (const auto& s : scores) {
            if (!s) ++n;
        }
        return n;
    }
};

struct GoldenScoreRecord {
    std::string candidate_id;
    double gs = 0.0;
    std::size_t improvements = 0;
    std::size_t m = 0;  // the denominator actually used
    std::size_t overflow_count = 0;
};

struct GoldenScoreTable {
    std::vector<GoldenScoreRecord> records;  // sorted by ascending candidate id
    std::string run_config_fingerprint;

    std::size_t size() const { return records.size(); }
};

inline ZeroShotProfile zero_shot_profile(Backend& backend, const AnchorSet& anchors) {
    ZeroShotProfile profile;
    profile.anchor_fingerprint = anchors.fingerprint();
    profile.backend_fingerprint = fingerprint(backend.descriptor());
    profile.scores.reserve(anchors.m());
    for (const auto& anchor : anchors.anchors) {
        if (!fits_budget(backend, anchor.task_text, anchor.answer_text)) {
            throw DataError("anchor '" + anchor.anchor_id +
                            "' exceeds the context budget on its own; every anchor must be "
                            "scoreable without a demonstration");
        }
        ScoredSpan span = backend.score_span({anchor.task_text, anchor.answer_text});
        profile.scores.push_back(span.mean_logprob());
    }
    return profile;
}

namespace detail {

// Smallest left-cut of the demonstration that brings the full prompt within
// budget, i.e. the longest fitting demonstration tail. Returns the cut
// position, or nullopt when even an empty demonstration does not fit.
inline std::optional<std::size_t> left_truncation_cut(const Backend& backend,
                                                      const std::string& demonstration,
                                                      const std::string& rest_prefix,
                                                      const std::string& target) {
    auto fits = [&](std::size_t cut) {
        return backend.count_tokens(demonstration.substr(cut) + rest_prefix + target) <=
               backend.context_budget();
    };
    if (!fits(demonstration.size())) return std::nullopt;
    std::size_t lo = 0;
    std::size_t hi = demonstration.size();
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (fits(mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

}  // namespace detail

inline OneShotRow one_shot_row(Backend& backend, const InstructionExample& candidate,
                               const AnchorSet& anchors, const PromptTemplate& tmpl,
                               OverflowPolicy policy = OverflowPolicy::CountAsNoImprovement,
                               const std::string* anchor_fingerprint = nullptr) {
    OneShotRow row;
    row.candidate_id = candidate.id;
    row.policy_applied = overflow_policy_name(policy);
    row.anchor_fingerprint = anchor_fingerprint ? *anchor_fingerprint : anchors.fingerprint();
    row.scores.reserve(anchors.m());

    const std::string demonstration = render(candidate, tmpl, RenderRole::Demonstration);

    for (std::size_t j = 0; j < anchors.m(); ++j) {
        const AnchorTask& anchor = anchors.anchors[j];
        if (anchor.source_example_id == candidate.id) {
            row.self_pairs.push_back(j);
        }

        std::string prefix = demonstration + tmpl.separator + anchor.task_text;
        if (!fits_budget(backend, prefix, anchor.answer_text)) {
            if (policy == OverflowPolicy::TruncateDemonstrationLeft) {
                auto cut = detail::left_truncation_cut(
                    backend, demonstration, tmpl.separator + anchor.task_text,
                    anchor.answer_text);
                if (!cut) {
                    row.scores.push_back(std::nullopt);
                    continue;
                }
                prefix = demonstration.substr(*cut) + tmpl.separator + anchor.task_text;
            } else {
                row.scores.push_back(std::nullopt);
                continue;
            }
        }
        ScoredSpan span = backend.score_span({prefix, anchor.answer_text});
        row.scores.push_back(span.mean_logprob());
    }
    return row;
}

// The candidate's golden score: the fraction of anchors whose answer
// likelihood strictly improves under the one-shot prompt.
inline GoldenScoreRecord golden_score(const OneShotRow& row, const ZeroShotProfile& profile,
                                      double tie_epsilon = 0.0) {
    if (tie_epsilon < 0.0) throw ConfigError("tie_epsilon must be >= 0");
    if (row.anchor_fingerprint != profile.anchor_fingerprint) {
        throw ConfigError("anchor fingerprint mismatch between row (" + row.anchor_fingerprint +
                          ") and profile (" + profile.anchor_fingerprint +
                          "); scores from different anchor sets are not comparable");
    }
    if (row.m() != profile.m()) {
        throw ConfigError("row and profile disagree on m");
    }

    GoldenScoreRecord rec;
    rec.candidate_id = row.candidate_id;
    for (std::size_t j = 0; j < row.scores.size(); ++j) {
        if (!row.scores[j]) {
            rec.overflow_count += 1;
            continue;
        }
        if (*row.scores[j] > profile.scores[j] + tie_epsilon) {
            rec.improvements += 1;
        }
    }

    const bool skip_reduces_m = row.policy_applied == "skip-reduces-m";
    rec.m = skip_reduces_m ? row.m() - rec.overflow_count : row.m();
    rec.gs = rec.m == 0 ? 0.0
                        : static_cast<double>(rec.improvements) / static_cast<double>(rec.m);
    return rec;
}

}  // namespace goldsift
