#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "goldsift/anchors.hpp"
#include "goldsift/backend.hpp"
#include "goldsift/dataset.hpp"
#include "goldsift/prompt.hpp"
#include "goldsift/scoring.hpp"
#include "goldsift/store.hpp"

namespace goldsift {

struct RunOptions {
    int parallelism = 1;
    OverflowPolicy overflow_policy = OverflowPolicy::CountAsNoImprovement;
    double tie_epsilon = 0.0;
    bool fresh = false;            // discard an existing store
    std::size_t max_rows = 0;      // cap on new rows this run; 0 = unlimited
    bool exclude_anchors = false;  // drop anchor source examples from the candidate pool

    // Polled between candidates; return true to stop. Completed rows are
    // flushed before returning, so the run can always resume.
    std::function<bool()> should_stop;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

struct RunResult {
    GoldenScoreTable table;
    std::size_t rows_scored = 0;   // new rows this run
    std::size_t rows_resumed = 0;  // rows already in the store
    bool stopped_early = false;
    std::string store_path;
};

// Binds a run to its full provenance: dataset + anchors + backend +
// template + policies. Resume refuses a store with a different fingerprint.
inline RunHeader make_run_header(const Dataset& dataset, const AnchorSet& anchors,
                                 Backend& backend, const PromptTemplate& tmpl,
                                 OverflowPolicy policy, double tie_epsilon) {
    RunHeader h;
    h.anchor_fingerprint = anchors.fingerprint();
    h.backend_descriptor = backend.descriptor();
    h.policy = overflow_policy_name(policy);
    h.tie_epsilon = tie_epsilon;
    h.m = anchors.m();

    nlohmann::json j;
    j["dataset_fingerprint"] = dataset.content_fingerprint();
    j["anchor_fingerprint"] = h.anchor_fingerprint;
    j["backend_descriptor"] = nlohmann::json::parse(h.backend_descriptor);
    j["template_fingerprint"] = tmpl.fingerprint();
    j["policy"] = h.policy;
    j["tie_epsilon"] = h.tie_epsilon;
    h.config_fingerprint = fingerprint(j.dump());
    return h;
}

// Scores every candidate against every anchor, streaming completed rows to
// the store. Restart skips completed candidates; the final table is
// identical to an uninterrupted run.
inline RunResult score_dataset(Backend& backend, const Dataset& dataset,
                               const AnchorSet& anchors, const PromptTemplate& tmpl,
                               const std::string& store_path, const RunOptions& opts = {}) {
    if (opts.parallelism < 1) throw ConfigError("parallelism must be >= 1");

    RunHeader header = make_run_header(dataset, anchors, backend, tmpl,
                                       opts.overflow_policy, opts.tie_epsilon);
    ScoreStore store = ScoreStore::open_for_run(store_path, header, opts.fresh);

    if (store.has_profile()) {
        if (store.profile().anchor_fingerprint != header.anchor_fingerprint) {
            throw ConfigError("stored zero-shot profile belongs to a different anchor set");
        }
    } else {
        store.put_profile(zero_shot_profile(backend, anchors));
    }

    std::unordered_set<std::string> excluded;
    if (opts.exclude_anchors) {
        for (const auto& a : anchors.anchors) excluded.insert(a.source_example_id);
    }

    std::vector<const InstructionExample*> todo;
    RunResult result;
    result.store_path = store_path;
    for (const auto& ex : dataset.examples) {
        if (excluded.count(ex.id)) continue;
        if (store.has_row(ex.id)) {
            result.rows_resumed += 1;
            continue;
        }
        todo.push_back(&ex);
    }
    if (opts.max_rows > 0 && todo.size() > opts.max_rows) {
        todo.resize(opts.max_rows);
        result.stopped_early = true;  // more work remains for a later run
    }

    const std::string anchor_fp = header.anchor_fingerprint;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<OneShotRow> ready;
    std::exception_ptr first_error;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    int active = 0;

    auto worker = [&]() {
        while (!stop.load(std::memory_order_relaxed)) {
            if (opts.should_stop && opts.should_stop()) {
                stop.store(true);
                break;
            }
            std::size_t i = next.fetch_add(1);
            if (i >= todo.size()) break;
            try {
                OneShotRow row = one_shot_row(backend, *todo[i], anchors, tmpl,
                                              opts.overflow_policy, &anchor_fp);
                std::lock_guard<std::mutex> lock(mu);
                ready.push_back(std::move(row));
                cv.notify_all();
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
                stop.store(true);
                cv.notify_all();
                break;
            }
        }
        std::lock_guard<std::mutex> lock(mu);
        --active;
        cv.notify_all();
    };

    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> lock(mu);
        active = opts.parallelism;
    }
    threads.reserve(static_cast<std::size_t>(opts.parallelism));
    for (int t = 0; t < opts.parallelism; ++t) threads.emplace_back(worker);

    {
        std::unique_lock<std::mutex> lock(mu);
        while (active > 0 || !ready.empty()) {
            cv.wait(lock, [&] { return active == 0 || !ready.empty(); });
            while (!ready.empty()) {
                OneShotRow row = std::move(ready.front());
                ready.pop_front();
                lock.unlock();
                store.append_row(row);
                result.rows_scored += 1;
                if (opts.progress) {
                    opts.progress(result.rows_scored, todo.size());
                }
                lock.lock();
            }
        }
    }
    for (auto& t : threads) t.join();

    if (first_error) std::rethrow_exception(first_error);
    if (stop.load() && opts.should_stop) result.stopped_early = true;

    result.table = store.build_table();
    return result;
}

}  // namespace goldsift
