#include <catch2/catch_amalgamated.hpp>

#include <goldsift/anchors.hpp>

#include <cmath>
#include <set>

#include "test_util.hpp"

using namespace goldsift;

namespace {

Dataset make_dataset(std::size_t n, std::size_t empty_every = 0) {
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        InstructionExample ex;
        ex.id = std::to_string(i);
        ex.instruction = "instruction number " + std::to_string(i);
        ex.answer = (empty_every && i % empty_every == 0) ? "" : "answer " + std::to_string(i);
        if (ex.answer.empty()) ex.flags |= static_cast<unsigned>(ExampleFlag::EmptyOutput);
        ds.examples.push_back(std::move(ex));
        ds.raw_records.push_back({{"instruction", ds.examples.back().instruction},
                                  {"output", ds.examples.back().answer}});
    }
    ds.rebuild_index();
    return ds;
}

// Indexed planted embeddings: example i (instruction "p<i>") maps to
// points[i]. Mirrors the text layout sample_kmeans embeds.
struct PlantedEmbeddings {
    std::vector<std::vector<double>> points;

    Dataset dataset() const {
        Dataset ds;
        for (std::size_t i = 0; i < points.size(); ++i) {
            InstructionExample ex;
            ex.id = std::to_string(i);
            ex.instruction = "p" + std::to_string(i);
            ex.answer = "a";
            ds.examples.push_back(std::move(ex));
            ds.raw_records.push_back({{"instruction", "p" + std::to_string(i)}, {"output", "a"}});
        }
        ds.rebuild_index();
        return ds;
    }

    EmbedFn embedder() const {
        return [points = points](const std::string& text) {
            std::size_t idx = std::stoul(text.substr(1, text.find('\n') - 1));
            return points.at(idx);
        };
    }
};

}  // namespace

TEST_CASE("sample_random: m equal to the eligible pool returns the whole pool") {
    Dataset ds = make_dataset(20, 5);  // ids 0,5,10,15 have empty answers
    std::size_t eligible = 16;
    AnchorSet set = sample_random(ds, eligible, 7);
    REQUIRE(set.m() == eligible);

    std::set<std::string> sources;
    for (const auto& a : set.anchors) {
        sources.insert(a.source_example_id);
        CHECK_FALSE(trim(a.answer_text).empty());
    }
    CHECK(sources.size() == eligible);
    CHECK(sources.count("0") == 0);
    CHECK(sources.count("5") == 0);
}

TEST_CASE("sample_random: deterministic for a fixed seed") {
    Dataset ds = make_dataset(50);
    AnchorSet a = sample_random(ds, 10, 42);
    AnchorSet b = sample_random(ds, 10, 42);
    CHECK(a.fingerprint() == b.fingerprint());
}

TEST_CASE("sample_random: different seeds give different fingerprints") {
    Dataset ds = make_dataset(1000);
    AnchorSet a = sample_random(ds, 100, 1);
    AnchorSet b = sample_random(ds, 100, 2);
    CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("sample_random: m beyond the eligible pool is rejected") {
    Dataset ds = make_dataset(10, 2);  // 5 eligible
    CHECK_THROWS_AS(sample_random(ds, 6, 0), ConfigError);
    CHECK_NOTHROW(sample_random(ds, 5, 0));
}

TEST_CASE("sample_kmeans: k=1 picks the example nearest the global centroid") {
    PlantedEmbeddings planted;
    planted.points = {{1.0, 0.0}, {0.6, 0.8}, {0.0, 1.0}, {-0.6, 0.8}, {0.8, 0.6}};
    Dataset ds = planted.dataset();

    AnchorSet set = sample_kmeans(ds, 1, 3, planted.embedder());
    REQUIRE(set.m() == 1);

    // centroid of the (already unit-norm) points, nearest point by hand
    std::vector<double> mean(2, 0.0);
    for (const auto& p : planted.points) {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= 5.0;
    mean[1] /= 5.0;
    std::size_t best = 0;
    double best_d = 1e9;
    for (std::size_t i = 0; i < planted.points.size(); ++i) {
        double dx = planted.points[i][0] - mean[0];
        double dy = planted.points[i][1] - mean[1];
        double d = dx * dx + dy * dy;
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    CHECK(set.anchors[0].source_example_id == std::to_string(best));
}

TEST_CASE("sample_kmeans: planted three-cluster geometry recovers one anchor per cluster") {
    PlantedEmbeddings planted;
    std::vector<double> centers = {M_PI / 2.0, M_PI / 2.0 + 2.0 * M_PI / 3.0,
                                   M_PI / 2.0 + 4.0 * M_PI / 3.0};
    std::vector<int> labels;
    std::mt19937_64 rng(11);
    for (int cluster = 0; cluster < 3; ++cluster) {
        for (int i = 0; i < 8; ++i) {
            double jitter = (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5) * 0.2;
            double angle = centers[static_cast<std::size_t>(cluster)] + jitter;
            planted.points.push_back({std::cos(angle), std::sin(angle)});
            labels.push_back(cluster);
        }
    }
    Dataset ds = planted.dataset();

    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
        std::vector<double> wcss;
        AnchorSet set = sample_kmeans(ds, 3, seed, planted.embedder(), default_template(), {},
                                      &wcss);
        REQUIRE(set.m() == 3);

        std::set<int> covered;
        for (const auto& a : set.anchors) {
            covered.insert(labels[std::stoul(a.source_example_id)]);
        }
        CHECK(covered.size() == 3);

        for (std::size_t i = 1; i < wcss.size(); ++i) {
            CHECK(wcss[i] <= wcss[i - 1] + 1e-12);
        }
    }
}

TEST_CASE("sample_kmeans: anchors are distinct examples") {
    PlantedEmbeddings planted;
    // two identical points force a nearest-centroid collision
    planted.points = {{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}};
    Dataset ds = planted.dataset();
    AnchorSet set = sample_kmeans(ds, 4, 5, planted.embedder());
    std::set<std::string> sources;
    for (const auto& a : set.anchors) sources.insert(a.source_example_id);
    CHECK(sources.size() == 4);
}

TEST_CASE("sample_kmeans: deterministic for a fixed seed") {
    PlantedEmbeddings planted;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 30; ++i) {
        double a = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 * M_PI;
        planted.points.push_back({std::cos(a), std::sin(a)});
    }
    Dataset ds = planted.dataset();
    AnchorSet a = sample_kmeans(ds, 5, 9, planted.embedder());
    AnchorSet b = sample_kmeans(ds, 5, 9, planted.embedder());
    CHECK(a.fingerprint() == b.fingerprint());
}

TEST_CASE("sample_kmeans: embedding dimension drift is an error") {
    Dataset ds = make_dataset(4);
    int calls = 0;
    EmbedFn embed = [&calls](const std::string&) {
        ++calls;
        return std::vector<double>(calls == 3 ? 3 : 2, 1.0);
    };
    try {
        sample_kmeans(ds, 2, 0, embed);
        FAIL("expected dimension drift error");
    } catch (const BackendError& err) {
        CHECK(err.kind() == BackendError::Kind::DimensionDrift);
    }
}

TEST_CASE("anchor file round trip and tamper detection") {
    testutil::TempDir tmp;
    Dataset ds = make_dataset(30);
    AnchorSet set = sample_random(ds, 8, 17);

    std::string path = tmp.file("anchors.json");
    save_anchors(set, path);
    AnchorSet loaded = load_anchors(path);
    CHECK(loaded.fingerprint() == set.fingerprint());
    CHECK(loaded.m() == 8);
    CHECK(loaded.construction.method == "random");

    // flip one character inside an answer; the fingerprint must catch it
    std::string text = testutil::read_file(path);
    auto pos = text.find("answer ");
    REQUIRE(pos != std::string::npos);
    text[pos] = 'b';
    tmp.write("anchors.json", text);
    CHECK_THROWS_AS(load_anchors(tmp.file("anchors.json")), DataError);
}

TEST_CASE("kmeans objective is non-increasing on random data") {
    std::mt19937_64 rng(77);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 200; ++i) {
        points.push_back({static_cast<double>(rng() >> 11) * 0x1.0p-53,
                          static_cast<double>(rng() >> 11) * 0x1.0p-53,
                          static_cast<double>(rng() >> 11) * 0x1.0p-53});
    }
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        KMeansResult result = kmeans(points, 7, seed);
        REQUIRE(result.wcss_history.size() >= 2);
        for (std::size_t i = 1; i < result.wcss_history.size(); ++i) {
            CHECK(result.wcss_history[i] <= result.wcss_history[i - 1] + 1e-12);
        }
    }
}
