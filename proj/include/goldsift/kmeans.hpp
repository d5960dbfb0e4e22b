#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "goldsift/errors.hpp"

namespace goldsift {

struct KMeansOptions {
    int max_iter = 100;
    double tol = 1e-4;  // stop when max centroid movement drops below this
};

struct KMeansResult {
    std::vector<std::vector<double>> centroids;  // k x dim
    std::vector<std::size_t> assignments;        // one per point
    std::vector<double> wcss_history;            // objective after each assignment step
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// Uniform draws derived directly from raw mt19937_64 output, so results do
// not depend on the standard library's distribution implementations.
inline double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    auto idx = static_cast<std::size_t>(unit_double(rng) * static_cast<double>(n));
    return idx >= n ? n - 1 : idx;
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Deterministic given (points,
// k, seed). Non-convergence within max_iter is not an error.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                           std::uint64_t seed, const KMeansOptions& opts = {}) {
    const std::size_t n = points.size();
    if (k == 0) throw ConfigError("k must be positive");
    if (k > n) throw ConfigError("k exceeds the number of points");
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw DataError("inconsistent point dimensions");
    }

    std::mt19937_64 rng(seed);
    KMeansResult result;
    result.centroids.reserve(k);

    // k-means++: first center uniform, then D^2-weighted draws.
    result.centroids.push_back(points[detail::uniform_index(rng, n)]);
    std::vector<double> best_d2(n, std::numeric_limits<double>::max());
    while (result.centroids.size() < k) {
        const auto& latest = result.centroids.back();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best_d2[i] = std::min(best_d2[i], detail::squared_distance(points[i], latest));
            total += best_d2[i];
        }
        std::size_t chosen;
        if (total <= 0.0) {
            chosen = detail::uniform_index(rng, n);
        } else {
            double r = detail::unit_double(rng) * total;
            double acc = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += best_d2[i];
                if (r < acc) {
                    chosen = i;
                    break;
                }
            }
        }
        result.centroids.push_back(points[chosen]);
    }

    result.assignments.assign(n, 0);
    std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        result.iterations = iter + 1;

        double wcss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                double d2 = detail::squared_distance(points[i], result.centroids[c]);
                if (d2 < best) {
                    best = d2;
                    best_c = c;
                }
            }
            result.assignments[i] = best_c;
            wcss += best;
        }
        result.wcss_history.push_back(wcss);

        for (auto& v : next) std::fill(v.begin(), v.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            counts[result.assignments[i]] += 1;
            const auto& p = points[i];
            auto& acc = next[result.assignments[i]];
            for (std::size_t d = 0; d < dim; ++d) acc[d] += p[d];
        }

        double max_move2 = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seat an empty cluster on the point farthest from its
                // current centroid, lowest index on ties.
                double far_d2 = -1.0;
                std::size_t far_i = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d2 = detail::squared_distance(points[i],
                                                         result.centroids[result.assignments[i]]);
                    if (d2 > far_d2) {
                        far_d2 = d2;
                        far_i = i;
                    }
                }
                next[c] = points[far_i];
                counts[c] = 1;
                result.assignments[far_i] = c;
            } else {
                for (std::size_t d = 0; d < dim; ++d) {
                    next[c][d] /= static_cast<double>(counts[c]);
                }
            }
            max_move2 = std::max(max_move2, detail::squared_distance(next[c], result.centroids[c]));
            result.centroids[c] = next[c];
        }

        if (std::sqrt(max_move2) < opts.tol) {
            result.converged = true;
            // Final assignment against the settled centroids.
            double final_wcss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::max();
                std::size_t best_c = 0;
                for (std::size_t c = 0; c < k; ++c) {
                    double d2 = detail::squared_distance(points[i], result.centroids[c]);
                    if (d2 < best) {
                        best = d2;
                        best_c = c;
                    }
                }
                result.assignments[i] = best_c;
                final_wcss += best;
            }
            result.wcss_history.push_back(final_wcss);
            break;
        }
    }
    return result;
}

}  // namespace goldsift
