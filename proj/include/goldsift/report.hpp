#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "goldsift/errors.hpp"
#include "goldsift/selection.hpp"

namespace goldsift {

struct DistributionReport {
    std::vector<double> bucket_edges;
    std::vector<std::size_t> bucket_counts;  // size = edges - 1

    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;

    // tau -> |{gs > tau}|
    std::vector<std::pair<double, std::size_t>> threshold_table;

    std::string source_table_fingerprint;
};

inline std::vector<double> default_bucket_edges() {
    std::vector<double> edges;
    for (int i = 0; i <= 10; ++i) edges.push_back(static_cast<double>(i) / 10.0);
    return edges;
}

inline std::vector<double> default_thresholds() {
    return {0.5, 0.6, 0.7, 0.8, 0.85, 0.9};
}

// Buckets are half-open [lo, hi) with the final bucket closed, so every
// gs in [0, 1] lands in exactly one bucket.
inline DistributionReport make_report(const GoldenScoreTable& table,
                                      std::vector<double> bucket_edges,
                                      std::vector<double> thresholds) {
    if (bucket_edges.size() < 2) {
        throw ConfigError("bucket edges need at least two values");
    }
    for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
        if (!(bucket_edges[i] > bucket_edges[i - 1])) {
            throw ConfigError("bucket edges must be strictly increasing");
        }
    }
    if (bucket_edges.front() > 0.0 || bucket_edges.back() < 1.0) {
        throw ConfigError("bucket edges must cover [0, 1]");
    }

    DistributionReport report;
    report.bucket_edges = std::move(bucket_edges);
    report.bucket_counts.assign(report.bucket_edges.size() - 1, 0);
    report.source_table_fingerprint = table_fingerprint(table);

    std::vector<double> values;
    values.reserve(table.records.size());
    for (const auto& rec : table.records) values.push_back(rec.gs);

    for (double gs : values) {
        auto it = std::upper_bound(report.bucket_edges.begin(), report.bucket_edges.end(), gs);
        std::size_t bucket;
        if (it == report.bucket_edges.begin()) {
            bucket = 0;  // below the first edge; cannot happen for gs >= 0
        } else {
            bucket = static_cast<std::size_t>(it - report.bucket_edges.begin()) - 1;
        }
        if (bucket >= report.bucket_counts.size()) {
            bucket = report.bucket_counts.size() - 1;  // closed final bucket
        }
        report.bucket_counts[bucket] += 1;
    }

    report.count = values.size();
    if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        report.mean = sum / static_cast<double>(values.size());

        std::sort(values.begin(), values.end());
        report.min = values.front();
        report.max = values.back();
        std::size_t n = values.size();
        report.median = (n % 2 == 1) ? values[n / 2]
                                     : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }

    std::sort(thresholds.begin(), thresholds.end());
    for (double tau : thresholds) {
        std::size_t c = 0;
        for (const auto& rec : table.records) {
            if (rec.gs > tau) ++c;
        }
        report.threshold_table.emplace_back(tau, c);
    }
    return report;
}

inline nlohmann::json report_to_json(const DistributionReport& report) {
    nlohmann::json j;
    j["bucket_edges"] = report.bucket_edges;
    j["bucket_counts"] = report.bucket_counts;
    j["summary"] = {{"count", report.count},
                    {"mean", report.mean},
                    {"median", report.median},
                    {"min", report.min},
                    {"max", report.max}};
    nlohmann::json thresholds = nlohmann::json::array();
    for (const auto& [tau, c] : report.threshold_table) {
        thresholds.push_back({{"tau", tau}, {"count", c}});
    }
    j["threshold_table"] = std::move(thresholds);
    j["source_table_fingerprint"] = report.source_table_fingerprint;
    return j;
}

// Aligned plain-text rendering for terminals and logs.
inline std::string render_report_text(const DistributionReport& report) {
    std::ostringstream out;
    out << "golden score distribution (" << report.count << " candidates)\n";
    out << std::fixed << std::setprecision(4);
    out << "  mean " << report.mean << "  median " << report.median << "  min " << report.min
        << "  max " << report.max << "\n\n";

    out << "  " << std::setw(16) << "bucket" << std::setw(10) << "count" << "\n";
    for (std::size_t i = 0; i < report.bucket_counts.size(); ++i) {
        std::ostringstream label;
        label << std::setprecision(2) << std::fixed << "[" << report.bucket_edges[i] << ", "
              << report.bucket_edges[i + 1] << (i + 1 == report.bucket_counts.size() ? "]" : ")");
        out << "  " << std::setw(16) << label.str() << std::setw(10) << report.bucket_counts[i]
            << "\n";
    }
    if (!report.threshold_table.empty()) {
        out << "\n  " << std::setw(16) << "threshold" << std::setw(10) << "count" << "\n";
        for (const auto& [tau, c] : report.threshold_table) {
            std::ostringstream label;
            label << std::setprecision(2) << std::fixed << "gs > " << tau;
            out << "  " << std::setw(16) << label.str() << std::setw(10) << c << "\n";
        }
    }
    return out.str();
}

// (x, y) pairs — bucket centers against counts — for external plotting.
inline std::string render_plot_data(const DistributionReport& report) {
    std::ostringstream out;
    for (std::size_t i = 0; i < report.bucket_counts.size(); ++i) {
        double center = 0.5 * (report.bucket_edges[i] + report.bucket_edges[i + 1]);
        out << center << " " << report.bucket_counts[i] << "\n";
    }
    return out.str();
}

}  // namespace goldsift
