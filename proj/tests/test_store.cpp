#include <catch2/catch_amalgamated.hpp>

#include <goldsift/backend_hash.hpp>
#include <goldsift/runner.hpp>
#include <goldsift/store.hpp>

#include "test_util.hpp"

using namespace goldsift;

namespace {

RunHeader fixture_header() {
    RunHeader h;
    h.config_fingerprint = "cfg-1";
    h.anchor_fingerprint = "anc-1";
    h.backend_descriptor = R"({"kind":"test"})";
    h.policy = "fixed-m";
    h.tie_epsilon = 0.0;
    h.m = 2;
    return h;
}

OneShotRow fixture_row(const std::string& id, double a, double b) {
    OneShotRow row;
    row.candidate_id = id;
    row.scores = {a, b};
    row.policy_applied = "fixed-m";
    row.anchor_fingerprint = "anc-1";
    return row;
}

ZeroShotProfile fixture_profile() {
    ZeroShotProfile p;
    p.scores = {-1.0, -2.0};
    p.anchor_fingerprint = "anc-1";
    p.backend_fingerprint = "bk-1";
    return p;
}

Dataset make_dataset(std::size_t n) {
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        InstructionExample ex;
        ex.id = std::to_string(i);
        ex.instruction = "candidate instruction " + std::to_string(i) + " with words";
        ex.answer = "candidate answer " + std::to_string(i);
        ds.examples.push_back(std::move(ex));
        ds.raw_records.push_back({{"instruction", ds.examples.back().instruction},
                                  {"output", ds.examples.back().answer}});
    }
    ds.rebuild_index();
    return ds;
}

AnchorSet make_anchors(std::size_t m) {
    AnchorSet set;
    set.construction.method = "fixture";
    for (std::size_t j = 0; j < m; ++j) {
        AnchorTask a;
        a.anchor_id = std::to_string(j);
        a.task_text = "anchor task " + std::to_string(j) + " asks something ";
        a.answer_text = "anchor answer " + std::to_string(j) + " words";
        a.source_example_id = "anchor-src-" + std::to_string(j);
        set.anchors.push_back(std::move(a));
    }
    return set;
}

}  // namespace

TEST_CASE("store: header, profile and rows survive reload") {
    testutil::TempDir tmp;
    std::string path = tmp.file("run.jsonl");
    {
        ScoreStore store = ScoreStore::open_for_run(path, fixture_header());
        store.put_profile(fixture_profile());
        store.append_row(fixture_row("b", -0.5, -1.5));
        store.append_row(fixture_row("a", -0.25, -2.5));
    }
    ScoreStore loaded = ScoreStore::load(path);
    REQUIRE(loaded.header().has_value());
    CHECK(loaded.header()->config_fingerprint == "cfg-1");
    CHECK(loaded.header()->m == 2);
    REQUIRE(loaded.has_profile());
    CHECK(loaded.profile().scores == std::vector<double>{-1.0, -2.0});
    REQUIRE(loaded.rows().size() == 2);
    CHECK(loaded.has_row("a"));
    CHECK(loaded.has_row("b"));
    CHECK(loaded.dropped_partial_lines() == 0);
}

TEST_CASE("store: corrupting a complete line is detected by its checksum") {
    testutil::TempDir tmp;
    std::string path = tmp.file("run.jsonl");
    {
        ScoreStore store = ScoreStore::open_for_run(path, fixture_header());
        store.put_profile(fixture_profile());
        store.append_row(fixture_row("a", -0.5, -1.5));
    }
    std::string text = testutil::read_file(path);
    auto pos = text.find("-0.5");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 4, "-0.7");
    tmp.write("run.jsonl", text);
    CHECK_THROWS_AS(ScoreStore::load(tmp.file("run.jsonl")), DataError);
}

TEST_CASE("store: a torn trailing line is dropped, not fatal") {
    testutil::TempDir tmp;
    std::string path = tmp.file("run.jsonl");
    {
        ScoreStore store = ScoreStore::open_for_run(path, fixture_header());
        store.put_profile(fixture_profile());
        store.append_row(fixture_row("a", -0.5, -1.5));
    }
    std::string text = testutil::read_file(path);
    text += R"({"type":"row","candidate_id":"b","scores":[-0.1)";  // no newline, cut mid-write
    tmp.write("run.jsonl", text);

    ScoreStore loaded = ScoreStore::load(tmp.file("run.jsonl"));
    CHECK(loaded.rows().size() == 1);
    CHECK(loaded.dropped_partial_lines() == 1);
    CHECK_FALSE(loaded.has_row("b"));
}

TEST_CASE("store: resume refuses a different run configuration") {
    testutil::TempDir tmp;
    std::string path = tmp.file("run.jsonl");
    { ScoreStore store = ScoreStore::open_for_run(path, fixture_header()); }

    RunHeader other = fixture_header();
    other.config_fingerprint = "cfg-2";
    CHECK_THROWS_AS(ScoreStore::open_for_run(path, other), ConfigError);

    // --fresh discards the old store
    ScoreStore fresh = ScoreStore::open_for_run(path, other, /*fresh=*/true);
    CHECK(fresh.header()->config_fingerprint == "cfg-2");
}

TEST_CASE("store: duplicate appends are ignored") {
    testutil::TempDir tmp;
    ScoreStore store = ScoreStore::open_for_run(tmp.file("run.jsonl"), fixture_header());
    store.append_row(fixture_row("a", -0.5, -1.5));
    store.append_row(fixture_row("a", -0.9, -0.9));
    CHECK(store.rows().size() == 1);
    CHECK(store.rows()[0].scores[0] == -0.5);
}

TEST_CASE("score_dataset: empty dataset still computes the profile") {
    testutil::TempDir tmp;
    HashMockBackend backend(1);
    Dataset empty;
    AnchorSet anchors = make_anchors(3);

    RunResult result = score_dataset(backend, empty, anchors, default_template(),
                                     tmp.file("run.jsonl"));
    CHECK(result.table.records.empty());
    CHECK(result.rows_scored == 0);

    ScoreStore store = ScoreStore::load(tmp.file("run.jsonl"));
    REQUIRE(store.has_profile());
    CHECK(store.profile().scores.size() == 3);
}

TEST_CASE("score_dataset: parallelism 1 and 8 produce identical canonical stores") {
    testutil::TempDir tmp;
    Dataset dataset = make_dataset(50);
    AnchorSet anchors = make_anchors(10);

    HashMockBackend b1(99);
    RunOptions o1;
    o1.parallelism = 1;
    RunResult r1 = score_dataset(b1, dataset, anchors, default_template(),
                                 tmp.file("p1.jsonl"), o1);

    HashMockBackend b8(99);
    RunOptions o8;
    o8.parallelism = 8;
    RunResult r8 = score_dataset(b8, dataset, anchors, default_template(),
                                 tmp.file("p8.jsonl"), o8);

    std::string c1 = ScoreStore::load(tmp.file("p1.jsonl")).canonical_text();
    std::string c8 = ScoreStore::load(tmp.file("p8.jsonl")).canonical_text();
    CHECK(c1 == c8);
    REQUIRE(r1.table.size() == r8.table.size());
    for (std::size_t i = 0; i < r1.table.size(); ++i) {
        CHECK(r1.table.records[i].candidate_id == r8.table.records[i].candidate_id);
        CHECK(r1.table.records[i].gs == r8.table.records[i].gs);
    }
}

TEST_CASE("score_dataset: interrupt after 20 of 50 rows then resume equals one uninterrupted run") {
    testutil::TempDir tmp;
    Dataset dataset = make_dataset(50);
    AnchorSet anchors = make_anchors(10);

    HashMockBackend full_backend(7);
    RunResult full = score_dataset(full_backend, dataset, anchors, default_template(),
                                   tmp.file("full.jsonl"));
    REQUIRE(full.table.size() == 50);

    HashMockBackend part_backend(7);
    RunOptions partial;
    partial.max_rows = 20;
    RunResult first = score_dataset(part_backend, dataset, anchors, default_template(),
                                    tmp.file("resumed.jsonl"), partial);
    CHECK(first.rows_scored == 20);
    CHECK(first.stopped_early);

    RunResult second = score_dataset(part_backend, dataset, anchors, default_template(),
                                     tmp.file("resumed.jsonl"));
    CHECK(second.rows_resumed == 20);
    CHECK(second.rows_scored == 30);

    std::string uninterrupted = ScoreStore::load(tmp.file("full.jsonl")).canonical_text();
    std::string resumed = ScoreStore::load(tmp.file("resumed.jsonl")).canonical_text();
    CHECK(uninterrupted == resumed);
}

TEST_CASE("score_dataset: backend failure aborts resumably") {
    testutil::TempDir tmp;
    Dataset dataset = make_dataset(10);
    AnchorSet anchors = make_anchors(2);

    // a backend that dies after a fixed number of spans
    class FlakyBackend : public HashMockBackend {
    public:
        FlakyBackend() : HashMockBackend(3) {}
        ScoredSpan score_span(const ScoreRequest& req) override {
            if (++calls_ > 8) {
                throw BackendError(BackendError::Kind::Unavailable, "synthetic outage");
            }
            return HashMockBackend::score_span(req);
        }

    private:
        std::atomic<int> calls_{0};
    };

    FlakyBackend backend;
    CHECK_THROWS_AS(score_dataset(backend, dataset, anchors, default_template(),
                                  tmp.file("run.jsonl")),
                    BackendError);

    // completed rows were flushed; a healthy backend finishes the run
    ScoreStore store = ScoreStore::load(tmp.file("run.jsonl"));
    CHECK(store.has_profile());
    CHECK(store.rows().size() >= 1);

    HashMockBackend healthy(3);
    RunResult result = score_dataset(healthy, dataset, anchors, default_template(),
                                     tmp.file("run.jsonl"));
    CHECK(result.table.size() == 10);
}

TEST_CASE("score_dataset: exclude-anchors drops anchor sources from the pool") {
    testutil::TempDir tmp;
    Dataset dataset = make_dataset(6);
    AnchorSet anchors = make_anchors(2);
    anchors.anchors[0].source_example_id = "2";
    anchors.anchors[1].source_example_id = "4";

    HashMockBackend backend(5);
    RunOptions opts;
    opts.exclude_anchors = true;
    RunResult result = score_dataset(backend, dataset, anchors, default_template(),
                                     tmp.file("run.jsonl"), opts);
    CHECK(result.table.size() == 4);
    for (const auto& rec : result.table.records) {
        CHECK(rec.candidate_id != "2");
        CHECK(rec.candidate_id != "4");
    }
}

TEST_CASE("score_dataset: should_stop flushes completed rows and reports early stop") {
    testutil::TempDir tmp;
    Dataset dataset = make_dataset(30);
    AnchorSet anchors = make_anchors(3);

    HashMockBackend backend(11);
    RunOptions opts;
    std::atomic<int> rows_seen{0};
    opts.progress = [&rows_seen](std::size_t, std::size_t) { ++rows_seen; };
    opts.should_stop = [&rows_seen] { return rows_seen.load() >= 5; };

    RunResult result = score_dataset(backend, dataset, anchors, default_template(),
                                     tmp.file("run.jsonl"), opts);
    CHECK(result.stopped_early);
    CHECK(result.rows_scored < 30);

    ScoreStore store = ScoreStore::load(tmp.file("run.jsonl"));
    CHECK(store.rows().size() == result.rows_scored);
}
