#include <catch2/catch_amalgamated.hpp>

#include <goldsift/backend_hash.hpp>
#include <goldsift/cli.hpp>

#include <algorithm>
#include <sstream>

#include "test_util.hpp"

using namespace goldsift;
using goldsift::cli::run_command;

namespace {

std::string fixture_dataset_json(std::size_t n) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    std::mt19937_64 rng(404);
    auto word = [&rng]() {
        std::uniform_int_distribution<int> len(2, 7);
        std::string w;
        int l = len(rng);
        for (int i = 0; i < l; ++i) w.push_back(static_cast<char>('a' + (rng() % 26)));
        return w;
    };
    for (std::size_t i = 0; i < n; ++i) {
        std::string instruction = word() + " " + word() + " " + word();
        std::string input = (i % 3 == 0) ? word() + " " + word() : "";
        std::string output = word() + " " + word() + " " + word() + " " + word();
        arr.push_back({{"instruction", instruction}, {"input", input}, {"output", output}});
    }
    return arr.dump(2);
}

}  // namespace

TEST_CASE("cli: --help exits zero") {
    CHECK(run_command({"--help"}) == 0);
    CHECK(run_command({"score", "--help"}) == 0);
}

TEST_CASE("cli: unknown flags are config errors") {
    CHECK(run_command({"report", "--no-such-flag"}) == cli::kExitConfig);
    CHECK(run_command({"definitely-not-a-subcommand"}) == cli::kExitConfig);
}

TEST_CASE("cli: select rejects conflicting predicates") {
    testutil::TempDir tmp;
    CHECK(run_command({"select", "--store", tmp.file("s.jsonl"), "--dataset",
                       tmp.file("d.json"), "--gt", "0.5", "--top-frac", "0.1", "--out",
                       tmp.file("o.json")}) == cli::kExitConfig);
}

TEST_CASE("cli: score run without required inputs is a config error") {
    CHECK(run_command({"score", "run", "--dataset", "x.json"}) == cli::kExitConfig);
}

TEST_CASE("cli: missing dataset file is a data error") {
    testutil::TempDir tmp;
    std::string anchors = tmp.write("anchors.json", "{}");
    CHECK(run_command({"score", "run", "--dataset", tmp.file("absent.json"), "--anchors",
                       anchors, "--backend", "hash:1", "--store", tmp.file("s.jsonl")}) ==
          cli::kExitData);
}

TEST_CASE("cli: unreachable backend exits with the backend code") {
    testutil::TempDir tmp;
    std::string dataset = tmp.write("data.json", fixture_dataset_json(2));
    REQUIRE(run_command({"anchors", "build", "--dataset", dataset, "--method", "random",
                         "--m", "1", "--seed", "1", "--out", tmp.file("anchors.json")}) == 0);

    // nothing listens on port 9; retries then exit 3
    CHECK(run_command({"score", "run", "--dataset", dataset, "--anchors",
                       tmp.file("anchors.json"), "--backend", "http:http://127.0.0.1:9",
                       "--store", tmp.file("store.jsonl")}) == cli::kExitBackend);
}

TEST_CASE("cli: full fixture pipeline matches the brute-force oracle") {
    testutil::TempDir tmp;
    const std::size_t n = 50;
    const std::size_t m = 10;
    const double tau = 0.5;
    std::string dataset_path = tmp.write("data.json", fixture_dataset_json(n));

    REQUIRE(run_command({"anchors", "build", "--dataset", dataset_path, "--method", "random",
                         "--m", std::to_string(m), "--seed", "3", "--out",
                         tmp.file("anchors.json")}) == 0);

    REQUIRE(run_command({"score", "run", "--dataset", dataset_path, "--anchors",
                         tmp.file("anchors.json"), "--backend", "hash:7", "--store",
                         tmp.file("store.jsonl"), "--parallelism", "4"}) == 0);

    REQUIRE(run_command({"select", "--store", tmp.file("store.jsonl"), "--dataset",
                         dataset_path, "--gt", "0.5", "--out", tmp.file("subset.json")}) == 0);

    REQUIRE(run_command({"report", "--store", tmp.file("store.jsonl"), "--out",
                         tmp.file("report.json"), "--plot-data", tmp.file("plot.txt")}) == 0);

    // Brute-force oracle: raw score_span calls, an explicit indicator loop,
    // and a hand-rolled threshold cut. No runner, store, or selection code.
    Dataset dataset = load_dataset(dataset_path);
    AnchorSet anchors = load_anchors(tmp.file("anchors.json"));
    PromptTemplate tmpl = default_template();
    HashMockBackend backend(7);

    std::vector<double> zsl;
    for (const auto& anchor : anchors.anchors) {
        zsl.push_back(backend.score_span({anchor.task_text, anchor.answer_text}).mean_logprob());
    }

    std::vector<std::pair<std::string, double>> oracle_gs;
    for (const auto& ex : dataset.examples) {
        std::string demo = render(ex, tmpl, RenderRole::Demonstration);
        std::size_t wins = 0;
        for (std::size_t j = 0; j < anchors.m(); ++j) {
            double s = backend
                           .score_span({demo + tmpl.separator + anchors.anchors[j].task_text,
                                        anchors.anchors[j].answer_text})
                           .mean_logprob();
            if (s > zsl[j]) ++wins;
        }
        oracle_gs.emplace_back(ex.id, static_cast<double>(wins) / static_cast<double>(m));
    }

    std::vector<std::pair<std::string, double>> expected;
    for (const auto& [id, gs] : oracle_gs) {
        if (gs > tau) expected.emplace_back(id, gs);
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return id_less(a.first, b.first);
    });

    nlohmann::json meta =
        nlohmann::json::parse(testutil::read_file(tmp.file("subset.json.meta.json")));
    std::vector<std::string> selected = meta.at("candidate_ids").get<std::vector<std::string>>();

    REQUIRE(selected.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(selected[i] == expected[i].first);
    }

    // exported records must be the original ones, in manifest order
    Dataset subset = load_dataset(tmp.file("subset.json"));
    REQUIRE(subset.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto* raw = dataset.find_raw(expected[i].first);
        REQUIRE(raw != nullptr);
        CHECK(subset.raw_records[i].dump() == raw->dump());
    }

    // report totals agree with the oracle's threshold count
    nlohmann::json report = nlohmann::json::parse(testutil::read_file(tmp.file("report.json")));
    CHECK(report.at("summary").at("count").get<std::size_t>() == n);
    for (const auto& row : report.at("threshold_table")) {
        if (row.at("tau").get<double>() == tau) {
            CHECK(row.at("count").get<std::size_t>() == expected.size());
        }
    }
    CHECK_FALSE(testutil::read_file(tmp.file("plot.txt")).empty());
}

TEST_CASE("cli: resume run adds only the missing rows") {
    testutil::TempDir tmp;
    std::string dataset = tmp.write("data.json", fixture_dataset_json(12));
    REQUIRE(run_command({"anchors", "build", "--dataset", dataset, "--method", "random",
                         "--m", "3", "--seed", "5", "--out", tmp.file("anchors.json")}) == 0);

    REQUIRE(run_command({"score", "run", "--dataset", dataset, "--anchors",
                         tmp.file("anchors.json"), "--backend", "hash:2", "--store",
                         tmp.file("store.jsonl"), "--max-rows", "5"}) == 0);
    CHECK(ScoreStore::load(tmp.file("store.jsonl")).rows().size() == 5);

    REQUIRE(run_command({"score", "run", "--dataset", dataset, "--anchors",
                         tmp.file("anchors.json"), "--backend", "hash:2", "--store",
                         tmp.file("store.jsonl")}) == 0);
    CHECK(ScoreStore::load(tmp.file("store.jsonl")).rows().size() == 12);

    // a different backend seed is a different run config
    CHECK(run_command({"score", "run", "--dataset", dataset, "--anchors",
                       tmp.file("anchors.json"), "--backend", "hash:3", "--store",
                       tmp.file("store.jsonl")}) == cli::kExitConfig);
    // --fresh discards and rescoring succeeds
    CHECK(run_command({"score", "run", "--dataset", dataset, "--anchors",
                       tmp.file("anchors.json"), "--backend", "hash:3", "--store",
                       tmp.file("store.jsonl"), "--fresh"}) == 0);
}

TEST_CASE("cli: inspect validates stores, anchors, and manifests") {
    testutil::TempDir tmp;
    std::string dataset = tmp.write("data.json", fixture_dataset_json(6));
    REQUIRE(run_command({"anchors", "build", "--dataset", dataset, "--method", "random",
                         "--m", "2", "--seed", "1", "--out", tmp.file("anchors.json")}) == 0);
    REQUIRE(run_command({"score", "run", "--dataset", dataset, "--anchors",
                         tmp.file("anchors.json"), "--backend", "hash:1", "--store",
                         tmp.file("store.jsonl")}) == 0);
    REQUIRE(run_command({"select", "--store", tmp.file("store.jsonl"), "--dataset", dataset,
                         "--top-frac", "0.5", "--out", tmp.file("subset.json")}) == 0);

    CHECK(run_command({"inspect", "--file", tmp.file("store.jsonl")}) == 0);
    CHECK(run_command({"inspect", "--file", tmp.file("anchors.json")}) == 0);
    CHECK(run_command({"inspect", "--file", tmp.file("subset.json.meta.json")}) == 0);
    CHECK(run_command({"inspect", "--file", dataset}) == cli::kExitData);

    // corrupt one store byte; inspect must flag it
    std::string text = testutil::read_file(tmp.file("store.jsonl"));
    auto pos = text.rfind("\"scores\":[-");
    REQUIRE(pos != std::string::npos);
    text[pos + 11] = '9';  // scores live in [-3, -0.01], so '9' always differs
    tmp.write("store.jsonl", text);
    CHECK(run_command({"inspect", "--file", tmp.file("store.jsonl")}) == cli::kExitData);
}

TEST_CASE("cli: kmeans anchor build with the feature-hash embedder") {
    testutil::TempDir tmp;
    std::string dataset = tmp.write("data.json", fixture_dataset_json(40));
    REQUIRE(run_command({"anchors", "build", "--dataset", dataset, "--method", "kmeans",
                         "--k", "5", "--seed", "2", "--embed-dim", "32", "--out",
                         tmp.file("anchors.json")}) == 0);
    AnchorSet anchors = load_anchors(tmp.file("anchors.json"));
    CHECK(anchors.m() == 5);
    CHECK(anchors.construction.method == "kmeans");
}

TEST_CASE("cli: duality demo writes a parseable report") {
    testutil::TempDir tmp;
    REQUIRE(run_command({"duality-demo", "--d-in", "16", "--d-out", "8", "--n-ins", "5",
                         "--n-test", "7", "--seed", "11", "--out",
                         tmp.file("duality.json")}) == 0);
    nlohmann::json j = nlohmann::json::parse(testutil::read_file(tmp.file("duality.json")));
    CHECK(j.at("decomposition_residual").get<double>() < 1e-9);
    CHECK(j.at("key_scaling_sweep").size() >= 3);

    CHECK(run_command({"duality-demo", "--d-in", "0"}) == cli::kExitConfig);
}

TEST_CASE("cli: config file supplies defaults, flags override") {
    testutil::TempDir tmp;
    std::string dataset = tmp.write("data.json", fixture_dataset_json(8));
    REQUIRE(run_command({"anchors", "build", "--dataset", dataset, "--method", "random",
                         "--m", "2", "--seed", "9", "--out", tmp.file("anchors.json")}) == 0);

    nlohmann::json cfg = {{"dataset_path", dataset},
                          {"anchors_path", tmp.file("anchors.json")},
                          {"backend", "hash:4"},
                          {"store_path", tmp.file("from-config.jsonl")},
                          {"parallelism", 2}};
    std::string cfg_path = tmp.write("run.json", cfg.dump());

    REQUIRE(run_command({"score", "run", "--config", cfg_path}) == 0);
    CHECK(ScoreStore::load(tmp.file("from-config.jsonl")).rows().size() == 8);

    // flag overrides the store path from the config
    REQUIRE(run_command({"score", "run", "--config", cfg_path, "--store",
                         tmp.file("override.jsonl")}) == 0);
    CHECK(ScoreStore::load(tmp.file("override.jsonl")).rows().size() == 8);
}
