#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "goldsift/anchors.hpp"
#include "goldsift/config.hpp"
#include "goldsift/dataset.hpp"
#include "goldsift/duality.hpp"
#include "goldsift/errors.hpp"
#include "goldsift/prompt.hpp"
#include "goldsift/report.hpp"
#include "goldsift/runner.hpp"
#include "goldsift/selection.hpp"
#include "goldsift/store.hpp"

namespace goldsift::cli {

// Exit-code contract: 0 success, 2 config errors, 3 backend failures,
// 4 data errors.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitData = 4;

// Set by the signal handler in the binary; polled between candidate rows so
// the store is always flushed before shutdown.
inline std::atomic<bool> g_interrupted{false};

namespace detail {

inline void log(const char* level, const std::string& msg) {
    std::fprintf(stderr, "[goldsift] %s: %s\n", level, msg.c_str());
}

inline void log_info(const std::string& msg) { log("info", msg); }
inline void log_warn(const std::string& msg) { log("warn", msg); }
inline void log_error(const std::string& msg) { log("error", msg); }

inline std::vector<double> parse_double_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(std::string("cannot parse ") + what + " value '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
    return out;
}

inline PromptTemplate resolve_template(const std::string& path) {
    return path.empty() ? default_template() : load_template(path);
}

inline void write_text_output(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw DataError("failed writing '" + path + "'");
}

struct AnchorsBuildArgs {
    std::string dataset;
    std::string format = "auto";
    std::string method;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::string template_path;
    std::string out;
    std::string embedder = "hash";
    std::size_t embed_dim = 64;
    std::string backend_arg;
    bool skip_bad = false;
};

inline int cmd_anchors_build(const AnchorsBuildArgs& a) {
    LoadOptions load_opts;
    load_opts.format = parse_dataset_format(a.format);
    load_opts.skip_bad = a.skip_bad;
    Dataset dataset = load_dataset(a.dataset, load_opts);
    log_info("loaded " + std::to_string(dataset.size()) + " examples from " + a.dataset);
    for (const auto& issue : dataset.skipped) {
        log_warn("skipped record " + std::to_string(issue.record_index) + ": " + issue.reason);
    }

    PromptTemplate tmpl = resolve_template(a.template_path);

    AnchorSet anchors;
    if (a.method == "random") {
        anchors = sample_random(dataset, a.count, a.seed, tmpl);
    } else if (a.method == "kmeans") {
        EmbedFn embed;
        std::unique_ptr<Backend> backend;
        if (a.embedder == "hash") {
            embed = [embedder = FeatureHashEmbedder(a.embed_dim, a.seed)](const std::string& t) {
                return embedder.embed(t);
            };
        } else if (a.embedder == "backend") {
            if (a.backend_arg.empty()) {
                throw ConfigError("--embedder backend requires --backend");
            }
            backend = make_backend(parse_backend_arg(a.backend_arg));
            embed = [&backend](const std::string& t) { return backend->embed(t); };
        } else {
            throw ConfigError("unknown embedder '" + a.embedder + "' (hash | backend)");
        }
        anchors = sample_kmeans(dataset, a.count, a.seed, embed, tmpl);
    } else {
        throw ConfigError("unknown anchor method '" + a.method + "' (random | kmeans)");
    }

    save_anchors(anchors, a.out);
    log_info("built " + std::to_string(anchors.m()) + " anchors (" + a.method +
             ", seed " + std::to_string(a.seed) + "), fingerprint " + anchors.fingerprint());
    return kExitOk;
}

struct ScoreRunArgs {
    std::string config_path;
    std::optional<std::string> dataset;
    std::optional<std::string> format;
    std::optional<std::string> anchors;
    std::optional<std::string> backend_arg;
    std::optional<std::string> store;
    std::optional<std::string> template_path;
    std::optional<int> parallelism;
    std::optional<std::string> overflow_policy;
    std::optional<double> tie_epsilon;
    std::optional<std::size_t> context_budget;
    std::optional<std::size_t> max_rows;
    bool fresh = false;
    bool exclude_anchors = false;
    bool skip_bad = false;
};

inline int cmd_score_run(const ScoreRunArgs& a) {
    RunConfig cfg;
    if (!a.config_path.empty()) cfg = load_run_config(a.config_path);

    if (a.dataset) cfg.dataset_path = *a.dataset;
    if (a.format) cfg.dataset_format = parse_dataset_format(*a.format);
    if (a.anchors) cfg.anchors_path = *a.anchors;
    if (a.backend_arg) cfg.backend = parse_backend_arg(*a.backend_arg);
    if (a.store) cfg.store_path = *a.store;
    if (a.template_path) cfg.template_path = *a.template_path;
    if (a.parallelism) cfg.parallelism = *a.parallelism;
    if (a.overflow_policy) cfg.overflow_policy = *a.overflow_policy;
    if (a.tie_epsilon) cfg.tie_epsilon = *a.tie_epsilon;
    if (a.context_budget) cfg.backend.context_budget = *a.context_budget;
    if (a.exclude_anchors) cfg.exclude_anchors = true;

    if (cfg.dataset_path.empty()) throw ConfigError("--dataset (or config dataset_path) is required");
    if (cfg.anchors_path.empty()) throw ConfigError("--anchors (or config anchors_path) is required");
    if (cfg.backend.kind.empty()) throw ConfigError("--backend (or config backend) is required");
    if (cfg.store_path.empty()) throw ConfigError("--store (or config store_path) is required");

    LoadOptions load_opts;
    load_opts.format = cfg.dataset_format;
    load_opts.skip_bad = a.skip_bad;
    Dataset dataset = load_dataset(cfg.dataset_path, load_opts);
    log_info("loaded " + std::to_string(dataset.size()) + " candidates from " + cfg.dataset_path);
    for (const auto& issue : dataset.skipped) {
        log_warn("skipped record " + std::to_string(issue.record_index) + ": " + issue.reason);
    }

    AnchorSet anchors = load_anchors(cfg.anchors_path);
    PromptTemplate tmpl = resolve_template(cfg.template_path);
    std::unique_ptr<Backend> backend = make_backend(cfg.backend);

    RunOptions opts;
    opts.parallelism = cfg.parallelism;
    opts.overflow_policy = overflow_policy_from_name(cfg.overflow_policy);
    opts.tie_epsilon = cfg.tie_epsilon;
    opts.fresh = a.fresh;
    opts.max_rows = a.max_rows.value_or(0);
    opts.exclude_anchors = cfg.exclude_anchors;
    opts.should_stop = [] { return g_interrupted.load(); };
    std::size_t last_logged = 0;
    opts.progress = [&last_logged](std::size_t done, std::size_t total) {
        if (done == total || done - last_logged >= 100) {
            last_logged = done;
            log_info("scored " + std::to_string(done) + "/" + std::to_string(total) + " rows");
        }
    };

    log_info("run fingerprint " + cfg.fingerprint() + ", m=" + std::to_string(anchors.m()) +
             ", policy=" + cfg.overflow_policy +
             ", parallelism=" + std::to_string(cfg.parallelism));
    RunResult result = score_dataset(*backend, dataset, anchors, tmpl, cfg.store_path, opts);

    log_info("scored " + std::to_string(result.rows_scored) + " new rows, resumed past " +
             std::to_string(result.rows_resumed) + "; store " + result.store_path + " holds " +
             std::to_string(result.table.size()) + " candidates");
    if (result.stopped_early) {
        log_warn("run stopped before completion; rerun the same command to resume");
    }
    return kExitOk;
}

struct SelectArgs {
    std::string store;
    std::string dataset;
    std::string format = "auto";
    std::optional<double> gt;
    std::optional<double> le;
    std::optional<double> top_frac;
    std::string out;
    std::string out_format = "auto";
};

inline int cmd_select(const SelectArgs& a) {
    int predicates = int(a.gt.has_value()) + int(a.le.has_value()) + int(a.top_frac.has_value());
    if (predicates != 1) {
        throw ConfigError("exactly one of --gt, --le, --top-frac is required");
    }

    ScoreStore store = ScoreStore::load(a.store);
    GoldenScoreTable table = store.build_table();
    if (table.records.empty()) throw DataError("score store holds no completed rows");

    SubsetManifest manifest;
    if (a.gt) {
        manifest = threshold_subset(table, *a.gt, ThresholdDirection::Greater);
    } else if (a.le) {
        manifest = threshold_subset(table, *a.le, ThresholdDirection::AtMost);
    } else {
        manifest = top_fraction(table, *a.top_frac);
    }

    LoadOptions load_opts;
    load_opts.format = parse_dataset_format(a.format);
    Dataset dataset = load_dataset(a.dataset, load_opts);

    export_subset(manifest, dataset, a.out, parse_dataset_format(a.out_format));
    log_info("selected " + std::to_string(manifest.count()) + " of " +
             std::to_string(table.size()) + " candidates (" + manifest.predicate + ") -> " +
             a.out);
    return kExitOk;
}

struct ReportArgs {
    std::string store;
    std::string edges;
    std::string thresholds;
    std::string out = "-";
    std::string plot_data;
};

inline int cmd_report(const ReportArgs& a) {
    ScoreStore store = ScoreStore::load(a.store);
    GoldenScoreTable table = store.build_table();

    std::vector<double> edges =
        a.edges.empty() ? default_bucket_edges() : parse_double_list(a.edges, "bucket edge");
    std::vector<double> thresholds = a.thresholds.empty()
                                         ? default_thresholds()
                                         : parse_double_list(a.thresholds, "threshold");

    DistributionReport report = make_report(table, std::move(edges), std::move(thresholds));
    write_text_output(a.out, report_to_json(report).dump(2) + "\n");
    if (a.out != "-") {
        // machine output went to the file; the aligned table goes to stdout
        std::cout << render_report_text(report);
    }
    if (!a.plot_data.empty()) {
        write_text_output(a.plot_data, render_plot_data(report));
    }
    return kExitOk;
}

struct DualityArgs {
    int d_in = 16;
    int d_out = 8;
    int n_ins = 5;
    int n_test = 7;
    std::uint64_t seed = 0;
    double scale = 0.0;
    std::string out = "-";
};

inline int cmd_duality(const DualityArgs& a) {
    if (a.d_in < 1 || a.d_out < 1 || a.n_ins < 0 || a.n_test < 1) {
        throw ConfigError("duality-demo needs d-in >= 1, d-out >= 1, n-ins >= 0, n-test >= 1");
    }
    nlohmann::json j = duality_report(a.d_in, a.d_out, a.n_ins, a.n_test, a.seed, a.scale);
    write_text_output(a.out, j.dump(2) + "\n");
    return kExitOk;
}

// Prints a file's provenance header and validates its checksums or
// fingerprint. Never mutates the file.
inline int cmd_inspect(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string first_line;
    std::getline(in, first_line);
    in.close();

    nlohmann::json first = nlohmann::json::parse(first_line, nullptr, false);
    if (first.is_object() && first.value("type", "") == "header") {
        ScoreStore store = ScoreStore::load(path);
        const auto& h = store.header();
        if (!h) throw DataError("store header is missing or torn");
        std::cout << "score store: " << path << "\n"
                  << "  config_fingerprint: " << h->config_fingerprint << "\n"
                  << "  anchor_fingerprint: " << h->anchor_fingerprint << "\n"
                  << "  backend: " << h->backend_descriptor << "\n"
                  << "  policy: " << h->policy << " (tie_epsilon " << h->tie_epsilon << ")\n"
                  << "  m: " << h->m << "\n"
                  << "  profile: " << (store.has_profile() ? "present" : "missing") << "\n"
                  << "  rows: " << store.rows().size() << "\n";
        if (store.dropped_partial_lines() > 0) {
            std::cout << "  note: dropped " << store.dropped_partial_lines()
                      << " torn trailing line(s)\n";
        }
        std::cout << "  checksums: ok\n";
        return kExitOk;
    }

    std::ifstream whole(path, std::ios::binary);
    nlohmann::json j = nlohmann::json::parse(whole, nullptr, false);
    if (j.is_object() && j.contains("anchors") && j.contains("construction")) {
        AnchorSet anchors = load_anchors(path);
        std::cout << "anchor set: " << path << "\n"
                  << "  method: " << anchors.construction.method << "\n"
                  << "  seed: " << anchors.construction.seed << "\n"
                  << "  parameters: " << anchors.construction.parameters.dump() << "\n"
                  << "  m: " << anchors.m() << "\n"
                  << "  fingerprint: " << anchors.fingerprint() << " (verified)\n";
        return kExitOk;
    }
    if (j.is_object() && j.contains("predicate")) {
        std::cout << "subset manifest: " << path << "\n"
                  << "  predicate: " << j.value("predicate", std::string{}) << "\n"
                  << "  count: " << j.value("count", 0) << "\n"
                  << "  source_table_fingerprint: "
                  << j.value("source_table_fingerprint", std::string{}) << "\n"
                  << "  dataset_fingerprint: " << j.value("dataset_fingerprint", std::string{})
                  << "\n";
        return kExitOk;
    }
    throw DataError("'" + path + "' is not a score store, anchor file, or subset manifest");
}

}  // namespace detail

// Entry point shared by the binary and the tests. `args` excludes the
// program name.
inline int run_command(std::vector<std::string> args) {
    CLI::App app{"golden-score data selection for instruction tuning"};
    app.require_subcommand(1);

    auto* anchors_cmd = app.add_subcommand("anchors", "anchor set construction");
    anchors_cmd->require_subcommand(1);
    auto build_args = std::make_shared<detail::AnchorsBuildArgs>();
    auto* anchors_build = anchors_cmd->add_subcommand("build", "build a predefined task set");
    anchors_build->add_option("--dataset", build_args->dataset, "dataset file")->required();
    anchors_build->add_option("--format", build_args->format, "auto | json-array | jsonl");
    anchors_build->add_option("--method", build_args->method, "random | kmeans")->required();
    anchors_build->add_option("--m,--k", build_args->count, "number of anchors")->required();
    anchors_build->add_option("--seed", build_args->seed, "sampling seed");
    anchors_build->add_option("--template", build_args->template_path, "prompt template file");
    anchors_build->add_option("--out", build_args->out, "anchor file to write")->required();
    anchors_build->add_option("--embedder", build_args->embedder,
                              "kmeans embedding source: hash | backend");
    anchors_build->add_option("--embed-dim", build_args->embed_dim,
                              "feature-hash embedding dimension");
    anchors_build->add_option("--backend", build_args->backend_arg,
                              "backend spec when --embedder backend");
    anchors_build->add_flag("--skip-bad", build_args->skip_bad,
                            "skip malformed records instead of aborting");

    auto* score_cmd = app.add_subcommand("score", "golden-score computation");
    score_cmd->require_subcommand(1);
    auto run_args = std::make_shared<detail::ScoreRunArgs>();
    auto* score_run = score_cmd->add_subcommand("run", "score a dataset against an anchor set");
    score_run->add_option("--config", run_args->config_path, "JSON config file with defaults");
    score_run->add_option("--dataset", run_args->dataset, "dataset file");
    score_run->add_option("--format", run_args->format, "auto | json-array | jsonl");
    score_run->add_option("--anchors", run_args->anchors, "anchor file");
    score_run->add_option("--backend", run_args->backend_arg,
                          "hash:<seed> | table:<file> | http:<base-url>");
    score_run->add_option("--store", run_args->store, "score store (JSON-lines, resumable)");
    score_run->add_option("--template", run_args->template_path, "prompt template file");
    score_run->add_option("--parallelism", run_args->parallelism, "worker threads");
    score_run->add_option("--overflow-policy", run_args->overflow_policy,
                          "fixed-m | skip-reduces-m | truncate-demonstration-left");
    score_run->add_option("--tie-epsilon", run_args->tie_epsilon,
                          "margin an improvement must clear");
    score_run->add_option("--context-budget", run_args->context_budget,
                          "max prefix+target tokens");
    score_run->add_option("--max-rows", run_args->max_rows,
                          "score at most N new candidates this run");
    score_run->add_flag("--fresh", run_args->fresh, "discard an existing store");
    score_run->add_flag("--exclude-anchors", run_args->exclude_anchors,
                        "drop anchor source examples from the candidate pool");
    score_run->add_flag("--skip-bad", run_args->skip_bad,
                        "skip malformed records instead of aborting");

    auto select_args = std::make_shared<detail::SelectArgs>();
    auto* select_cmd = app.add_subcommand("select", "cut a subset from a score store");
    select_cmd->add_option("--store", select_args->store, "score store")->required();
    select_cmd->add_option("--dataset", select_args->dataset, "dataset the store was built from")
        ->required();
    select_cmd->add_option("--format", select_args->format, "dataset format");
    select_cmd->add_option("--gt", select_args->gt, "keep gs > tau");
    select_cmd->add_option("--le", select_args->le, "keep gs <= tau");
    select_cmd->add_option("--top-frac", select_args->top_frac, "keep the top fraction (0, 1]");
    select_cmd->add_option("--out", select_args->out, "subset file to write")->required();
    select_cmd->add_option("--out-format", select_args->out_format,
                           "subset format: auto | json-array | jsonl");

    auto report_args = std::make_shared<detail::ReportArgs>();
    auto* report_cmd = app.add_subcommand("report", "golden-score distribution report");
    report_cmd->add_option("--store", report_args->store, "score store")->required();
    report_cmd->add_option("--edges", report_args->edges, "comma-separated bucket edges");
    report_cmd->add_option("--thresholds", report_args->thresholds,
                           "comma-separated threshold list");
    report_cmd->add_option("--out", report_args->out, "JSON report path, or - for stdout");
    report_cmd->add_option("--plot-data", report_args->plot_data, "write (x, y) pairs here");

    auto duality_args = std::make_shared<detail::DualityArgs>();
    auto* duality_cmd =
        app.add_subcommand("duality-demo", "attention decomposition residuals and softmax gap");
    duality_cmd->add_option("--d-in", duality_args->d_in, "input dimension");
    duality_cmd->add_option("--d-out", duality_args->d_out, "projection dimension");
    duality_cmd->add_option("--n-ins", duality_args->n_ins, "demonstration token count");
    duality_cmd->add_option("--n-test", duality_args->n_test, "test token count");
    duality_cmd->add_option("--seed", duality_args->seed, "instance seed");
    duality_cmd->add_option("--scale", duality_args->scale,
                            "softmax scale (default sqrt(d_in))");
    duality_cmd->add_option("--out", duality_args->out, "JSON output path, or - for stdout");

    std::string inspect_path;
    auto* inspect_cmd =
        app.add_subcommand("inspect", "print a file's header and validate its checksums");
    inspect_cmd->add_option("--file", inspect_path, "store / anchor / manifest file")->required();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (anchors_build->parsed()) return detail::cmd_anchors_build(*build_args);
        if (score_run->parsed()) return detail::cmd_score_run(*run_args);
        if (select_cmd->parsed()) return detail::cmd_select(*select_args);
        if (report_cmd->parsed()) return detail::cmd_report(*report_args);
        if (duality_cmd->parsed()) return detail::cmd_duality(*duality_args);
        if (inspect_cmd->parsed()) return detail::cmd_inspect(inspect_path);
        detail::log_error("no subcommand selected");
        return kExitConfig;
    } catch (const ConfigError& err) {
        detail::log_error(err.what());
        return kExitConfig;
    } catch (const TemplateError& err) {
        detail::log_error(err.what());
        return kExitConfig;
    } catch (const BackendError& err) {
        detail::log_error(err.what());
        return kExitBackend;
    } catch (const DataError& err) {
        detail::log_error(err.what());
        return kExitData;
    } catch (const std::exception& err) {
        detail::log_error(std::string("unexpected failure: ") + err.what());
        return 1;
    }
}

}  // namespace goldsift::cli
