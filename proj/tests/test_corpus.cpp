#include "archboot/corpus.hpp"
#include "archboot/linear_head.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace archboot;
namespace fs = std::filesystem;

namespace {

Sample make_sample(const std::string& id, const std::string& location,
                   const Date& date, std::vector<float> embedding)
{
    Sample s;
    s.id = id;
    s.location_id = location;
    s.tile = {1048576, 1048576, 21};
    s.capture_date = date;
    s.embedding = std::move(embedding);
    return s;
}

WeightedCorpus tiny_corpus()
{
    WeightedCorpus corpus;
    corpus.task.class_tag = ClassTag::task;
    corpus.background.class_tag = ClassTag::background;
    corpus.task.samples = {
        make_sample("t0", "T0", {2021, 1, 1}, {1.0f, 0.0f}),
        make_sample("t1", "T0", {2019, 1, 1}, {0.8f, 0.1f}),
        make_sample("t2", "T1", {2018, 1, 1}, {0.9f, -0.1f}),
    };
    corpus.task.alpha = {1, 0, 2};
    corpus.task.conf = {0.9, 0.4, 0.7};
    corpus.background.samples = {
        make_sample("b0", "B0", {2021, 1, 1}, {-1.0f, 0.2f}),
        make_sample("b1", "B0", {2017, 6, 1}, {-0.5f, 0.4f}),
    };
    corpus.background.alpha = {1, 1};
    corpus.background.conf = {0.2, 0.3};
    corpus.date_ref = {2021, 1, 1};
    corpus.seed_count = 1;
    return corpus;
}

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() /
               ("archboot_corpus_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("sum_alpha")
{
    auto corpus = tiny_corpus();
    CHECK(sum_alpha(corpus.task) == 3);
    CHECK(sum_alpha(corpus.background) == 2);
    corpus.task.alpha = {0, 0, 0};
    CHECK(sum_alpha(corpus.task) == 0);
}

TEST_CASE("seed corpus starts at N per class")
{
    // A fresh corpus with N seeds per class and no increments sums to N.
    WeightedCorpus corpus;
    corpus.task.class_tag = ClassTag::task;
    corpus.background.class_tag = ClassTag::background;
    for (int i = 0; i < 100; ++i) {
        corpus.task.samples.push_back(make_sample(
            "t" + std::to_string(i), "T" + std::to_string(i), {2021, 1, 1},
            {0.0f}));
        corpus.background.samples.push_back(make_sample(
            "b" + std::to_string(i), "B" + std::to_string(i), {2021, 1, 1},
            {0.0f}));
    }
    corpus.task.alpha.assign(100, 1);
    corpus.background.alpha.assign(100, 1);
    CHECK(sum_alpha(corpus.task) == 100);
    CHECK(sum_alpha(corpus.background) == 100);
}

TEST_CASE("effective training multiset omits alpha zero")
{
    const auto corpus = tiny_corpus();
    const auto entries = effective_training_multiset(corpus);
    REQUIRE(entries.size() == 4); // t1 has alpha 0
    CHECK(entries[0].sample->id == "t0");
    CHECK(entries[0].weight == 1);
    CHECK(entries[1].sample->id == "t2");
    CHECK(entries[1].weight == 2);
    CHECK(entries[2].label == ClassTag::background);
}

TEST_CASE("weighted loss equals multiset expansion")
{
    const auto corpus = tiny_corpus();
    LinearHead head;
    head.w = {0.3, -0.2};
    head.b = 0.1;

    double expanded = 0.0;
    for (const auto& entry : effective_training_multiset(corpus)) {
        for (std::int64_t c = 0; c < entry.weight; ++c) {
            expanded +=
                sample_loss(head, entry.sample->embedding, entry.label);
        }
    }
    CHECK(weighted_loss(head, corpus) == doctest::Approx(expanded).epsilon(1e-12));
}

TEST_CASE("corpus file round trip")
{
    TempDir dir;
    CorpusPaths paths{dir.file("labels.csv"), dir.file("emb.aemb"),
                      dir.file("state.jsonl")};

    LoadedCorpus original;
    original.corpus = tiny_corpus();
    original.unlabeled.push_back(
        make_sample("u0", "U0", {2020, 5, 1}, {0.1f, 0.2f}));
    save_corpus(original, paths);

    const auto loaded = load_corpus(paths);
    CHECK(loaded.corpus.task.size() == 3);
    CHECK(loaded.corpus.background.size() == 2);
    CHECK(loaded.unlabeled.size() == 1);
    CHECK(loaded.corpus.date_ref == Date{2021, 1, 1});
    CHECK(loaded.corpus.seed_count == 1);

    // Alphas and confidences come back through the state file.
    CHECK(sum_alpha(loaded.corpus.task) == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& s = loaded.corpus.task.samples[i];
        // seeds first: t0 is T0's latest capture
        if (s.id == "t0") {
            CHECK(s.seed_label == ClassTag::task);
        }
    }

    // Second round trip is bit-identical.
    TempDir dir2;
    CorpusPaths paths2{dir2.file("labels.csv"), dir2.file("emb.aemb"),
                       dir2.file("state.jsonl")};
    save_corpus(loaded, paths2);
    const auto reloaded = load_corpus(paths2);
    for (std::size_t i = 0; i < loaded.corpus.task.size(); ++i) {
        CHECK(reloaded.corpus.task.samples[i].id ==
              loaded.corpus.task.samples[i].id);
        CHECK(reloaded.corpus.task.samples[i].embedding ==
              loaded.corpus.task.samples[i].embedding);
        CHECK(reloaded.corpus.task.alpha[i] == loaded.corpus.task.alpha[i]);
        CHECK(reloaded.corpus.task.conf[i] == loaded.corpus.task.conf[i]);
    }
}

TEST_CASE("malformed labels fail with a line number")
{
    TempDir dir;
    {
        std::ofstream out(dir.file("labels.csv"));
        out << "id,location_id,tile_x,tile_y,zoom,date,class\n";
        out << "a,L0,1,1,21,2020-01-01,task\n";
        out << "b,L1,1,1,21,not-a-date,background\n";
    }
    write_embeddings(dir.file("emb.aemb"), 1, {{"a", {0.f}}, {"b", {0.f}}});
    try {
        load_corpus({dir.file("labels.csv"), dir.file("emb.aemb"), ""});
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("empty corpus rejected")
{
    TempDir dir;
    {
        std::ofstream out(dir.file("labels.csv"));
        out << "id,location_id,tile_x,tile_y,zoom,date,class\n";
    }
    write_embeddings(dir.file("emb.aemb"), 1, {});
    CHECK_THROWS(load_corpus({dir.file("labels.csv"), dir.file("emb.aemb"), ""}));
}

TEST_CASE("missing embedding is a load-time error")
{
    TempDir dir;
    {
        std::ofstream out(dir.file("labels.csv"));
        out << "id,location_id,tile_x,tile_y,zoom,date,class\n";
        out << "a,L0,1,1,21,2020-01-01,task\n";
        out << "b,L1,1,1,21,2020-01-01,background\n";
    }
    write_embeddings(dir.file("emb.aemb"), 1, {{"a", {0.f}}});
    CHECK_THROWS_WITH_AS(
        load_corpus({dir.file("labels.csv"), dir.file("emb.aemb"), ""}),
        "no embedding for sample id b", std::runtime_error);
}

TEST_CASE("embedding container round trip")
{
    TempDir dir;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> dist(-1.f, 1.f);
    std::vector<std::pair<std::string, std::vector<float>>> records;
    for (int i = 0; i < 100; ++i) {
        std::vector<float> v(8);
        for (auto& x : v) {
            x = dist(rng);
        }
        records.emplace_back("id" + std::to_string(i), std::move(v));
    }
    write_embeddings(dir.file("e.aemb"), 8, records);
    auto [dim, table] = read_embeddings(dir.file("e.aemb"));
    CHECK(dim == 8);
    REQUIRE(table.size() == 100);
    for (const auto& [id, values] : records) {
        CHECK(table.at(id) == values);
    }
}
