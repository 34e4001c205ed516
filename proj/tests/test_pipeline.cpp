#include "archboot/pipeline.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace archboot;
using namespace archboot::pipeline;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() /
               ("archboot_pipe_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in),
            std::istreambuf_iterator<char>()};
}

std::vector<Sample> numbered_samples(std::size_t n, std::uint64_t seed = 9)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 2.0);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%04zu", i);
        s.id = buf;
        s.location_id = s.id;
        s.capture_date = {2021, 1, 1};
        s.embedding = {static_cast<float>(normal(rng))};
        samples.push_back(std::move(s));
    }
    return samples;
}

LinearHead unit_head()
{
    LinearHead head;
    head.w = {1.0};
    return head;
}

} // namespace

TEST_CASE("shard planning")
{
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) {
        ids.push_back("id" + std::to_string(i));
    }
    const auto plan = plan_shards(ids, 3);
    REQUIRE(plan.shard_count() == 3);
    CHECK(plan.shards[0].size() == 4);
    CHECK(plan.shards[1].size() == 3);
    CHECK(plan.shards[2].size() == 3);
    CHECK(plan.total_ids() == 10);

    // Every id lands in exactly one shard, in sorted order.
    std::vector<std::string> flattened;
    for (const auto& shard : plan.shards) {
        flattened.insert(flattened.end(), shard.begin(), shard.end());
    }
    auto sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    CHECK(flattened == sorted);

    CHECK_THROWS_AS(plan_shards(ids, 0), std::out_of_range);

    // More shards than ids leaves the surplus shards empty.
    const auto sparse = plan_shards({"a", "b"}, 5);
    CHECK(sparse.shards[0] == std::vector<std::string>{"a"});
    CHECK(sparse.shards[1] == std::vector<std::string>{"b"});
    CHECK(sparse.shards[4].empty());
}

TEST_CASE("merged scores are identical for any worker count")
{
    const auto samples = numbered_samples(103);
    const auto head = unit_head();
    std::vector<std::string> ids;
    for (const auto& s : samples) {
        ids.push_back(s.id);
    }
    const auto plan = plan_shards(ids, 7);

    TempDir one_dir;
    TempDir four_dir;
    const auto one = parallel_score(samples, head, plan, one_dir.path.string(), 1);
    const auto four = parallel_score(samples, head, plan, four_dir.path.string(), 4);
    CHECK(one.shard_paths.size() == 7);
    CHECK(slurp(one.merged_path) == slurp(four.merged_path));

    // The merged file holds every id once, sorted, with the model's scores.
    const auto records = read_score_file(one.merged_path);
    REQUIRE(records.size() == samples.size());
    auto sorted_ids = ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].id == sorted_ids[i]);
    }
    for (const auto& s : samples) {
        const auto it = std::find_if(
            records.begin(), records.end(),
            [&s](const ScoreRecord& r) { return r.id == s.id; });
        REQUIRE(it != records.end());
        CHECK(it->conf == predict_confidence(head, s.embedding));
    }
}

TEST_CASE("empty shards are harmless")
{
    const auto samples = numbered_samples(2);
    const auto plan = plan_shards({"s0000", "s0001"}, 4);
    TempDir dir;
    const auto output =
        parallel_score(samples, unit_head(), plan, dir.path.string(), 2);
    CHECK(read_score_file(output.merged_path).size() == 2);
}

TEST_CASE("a planned id missing from the snapshot aborts the run")
{
    const auto samples = numbered_samples(2);
    ShardPlan plan;
    plan.shards = {{"s0000"}, {"ghost"}};
    TempDir dir;
    CHECK_THROWS_WITH_AS(
        parallel_score(samples, unit_head(), plan, dir.path.string(), 2),
        "planned id not in snapshot: ghost", std::runtime_error);
}

TEST_CASE("malformed score lines carry their line number")
{
    TempDir dir;
    const auto path = (dir.path / "bad.jsonl").string();
    {
        std::ofstream out(path);
        out << R"({"id":"a","conf":0.5})" << '\n';
        out << "oops\n";
    }
    try {
        read_score_file(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("global top-K agrees with the sort oracle")
{
    const auto samples = numbered_samples(200, 31);
    const auto head = unit_head();
    std::vector<std::string> ids;
    for (const auto& s : samples) {
        ids.push_back(s.id);
    }
    TempDir dir;
    const auto output = parallel_score(samples, head, plan_shards(ids, 5),
                                       dir.path.string(), 2);

    auto records = read_score_file(output.merged_path);
    std::sort(records.begin(), records.end(),
              [](const ScoreRecord& a, const ScoreRecord& b) {
                  if (a.conf != b.conf) {
                      return a.conf > b.conf;
                  }
                  return a.id < b.id;
              });

    for (std::size_t k : {std::size_t{0}, std::size_t{1}, std::size_t{17},
                          std::size_t{200}}) {
        const auto top = select_top_k_global(output.shard_paths, k);
        REQUIRE(top.size() == k);
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(top[i] == records[i].id);
        }
    }
    CHECK_THROWS_AS(select_top_k_global(output.shard_paths, 201),
                    std::out_of_range);
}

TEST_CASE("top-K ties prefer the lower id")
{
    TempDir dir;
    const auto path = (dir.path / "ties.jsonl").string();
    {
        std::ofstream out(path);
        out << R"({"id":"z","conf":0.5})" << '\n';
        out << R"({"id":"a","conf":0.5})" << '\n';
        out << R"({"id":"m","conf":0.5})" << '\n';
    }
    CHECK(select_top_k_global({path}, 2) ==
          std::vector<std::string>{"a", "m"});
}

TEST_CASE("GIS export emits one point per detected location")
{
    WeightedCorpus corpus;
    corpus.task.class_tag = ClassTag::task;
    corpus.background.class_tag = ClassTag::background;
    corpus.date_ref = {2014, 1, 1};

    auto add = [](HistoryGroup& group, const std::string& location, int year,
                  double conf) {
        Sample s;
        s.id = location + "_" + std::to_string(year);
        s.location_id = location;
        s.tile = {1048576, 1048600, 21};
        s.capture_date = {year, 1, 1};
        s.embedding = {0.0f};
        group.samples.push_back(std::move(s));
        group.alpha.push_back(1);
        group.conf.push_back(conf);
    };

    // Location A steps on in 2012; location B never does.
    const double a_conf[] = {0.05, 0.1, 0.85, 0.9, 0.95};
    for (int k = 0; k < 5; ++k) {
        add(corpus.task, "A", 2010 + k, a_conf[k]);
        add(corpus.background, "B", 2010 + k, 0.1);
    }

    TempDir dir;
    const auto path = (dir.path / "detections.geojson").string();
    CHECK(export_gis(corpus, 0.5, path) == 1);

    std::ifstream in(path);
    const auto doc = nlohmann::json::parse(in);
    CHECK(doc.at("type") == "FeatureCollection");
    REQUIRE(doc.at("features").size() == 1);
    const auto& feature = doc.at("features").at(0);
    CHECK(feature.at("properties").at("location_id") == "A");
    CHECK(feature.at("properties").at("year") == 2012);
    CHECK(feature.at("properties").at("class") == "task");
    CHECK(feature.at("properties").at("confidence") == 0.85);

    const auto centroid = tilegrid::tile_center({1048576, 1048600, 21});
    CHECK(feature.at("geometry").at("coordinates").at(0) ==
          doctest::Approx(centroid.lon));
    CHECK(feature.at("geometry").at("coordinates").at(1) ==
          doctest::Approx(centroid.lat));

    // Raising the threshold leaves detection years unchanged because the
    // smoothed step is binary; only a step that never fires is excluded.
    const auto path2 = (dir.path / "detections2.geojson").string();
    CHECK(export_gis(corpus, 0.9, path2) == 1);
}

TEST_CASE("state directory lock is exclusive")
{
    TempDir dir;
    {
        StateLock lock(dir.path.string());
        CHECK_THROWS_AS(StateLock{dir.path.string()}, std::runtime_error);
    }
    // Released on destruction; a new lock succeeds.
    CHECK_NOTHROW(StateLock{dir.path.string()});
}
