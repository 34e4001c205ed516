#include "archboot/evaluation.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace archboot;
using namespace archboot::evaluation;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() /
               ("archboot_eval_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

SyntheticSpec small_spec(std::uint64_t seed = 1)
{
    SyntheticSpec spec;
    spec.dim = 4;
    spec.seeds_per_class = 10;
    spec.separation = 4.0;
    spec.unlabeled_locations = 20;
    spec.captures_per_location = 3;
    spec.validation_per_class = 25;
    spec.seed = seed;
    return spec;
}

// One-dimensional pool: task at +4, background at -4, each value nudged so
// confidences are distinct. The unit head separates them perfectly.
struct SeparablePool {
    LabeledPool train;
    std::vector<Sample> test;
    GroundTruth truth;
    LinearHead head;

    SeparablePool(std::int64_t train_per_class, std::int64_t test_per_class)
    {
        head.w = {1.0};
        head.b = 0.0;
        std::int64_t next_id = 0;
        auto add = [&](ClassTag cls, bool to_train, std::int64_t i) {
            Sample s;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "s%06lld",
                          static_cast<long long>(next_id++));
            s.id = buf;
            s.location_id = s.id;
            s.capture_date = {2021, 1, 1};
            const double base = cls == ClassTag::task ? 4.0 : -4.0;
            s.embedding = {static_cast<float>(base + 0.001 * i)};
            truth.emplace(s.id, cls);
            if (to_train) {
                train.samples.push_back(std::move(s));
                train.labels.push_back(cls);
            } else {
                test.push_back(std::move(s));
            }
        };
        for (std::int64_t i = 0; i < train_per_class; ++i) {
            add(ClassTag::task, true, i);
            add(ClassTag::background, true, i);
        }
        for (std::int64_t i = 0; i < test_per_class; ++i) {
            add(ClassTag::task, false, i);
            add(ClassTag::background, false, i);
        }
    }
};

} // namespace

TEST_CASE("accuracy on the published confusion tables")
{
    // Early-iteration and final-model confusion tables.
    const ConfusionCounts early{13892, 8181, 5334, 3730};
    CHECK(early.total() == 31137);
    CHECK(accuracy(early) == 22073.0 / 31137.0);

    const ConfusionCounts final_model{16015, 10924, 1691, 707};
    CHECK(final_model.total() == 29337);
    CHECK(accuracy(final_model) == 26939.0 / 29337.0);
    CHECK(accuracy(final_model) == doctest::Approx(0.918).epsilon(5e-4));

    CHECK_THROWS_AS(accuracy(ConfusionCounts{}), std::out_of_range);
}

TEST_CASE("per-class precision")
{
    CHECK(precision_class(999, 1) == 0.999);
    CHECK(precision_class(5, 0) == 1.0);
    CHECK(precision_class(812, 188) == 0.812);
    CHECK_THROWS_AS(precision_class(0, 0), std::out_of_range);
}

TEST_CASE("confusion counts agree with a direct recount")
{
    SeparablePool pool(0, 50);
    const auto counts = confusion_counts(pool.head, pool.test, pool.truth);
    CHECK(counts.tp == 50);
    CHECK(counts.tn == 50);
    CHECK(counts.fp == 0);
    CHECK(counts.fn == 0);

    // Flip the head: every prediction lands on the wrong side.
    LinearHead inverted;
    inverted.w = {-1.0};
    const auto flipped = confusion_counts(inverted, pool.test, pool.truth);
    CHECK(flipped.tp == 0);
    CHECK(flipped.fp == 50);
    CHECK(flipped.fn == 50);

    Sample stranger;
    stranger.id = "unknown";
    stranger.embedding = {0.0f};
    std::vector<Sample> strangers{stranger};
    CHECK_THROWS(confusion_counts(pool.head, strangers, pool.truth));
}

TEST_CASE("synthetic corpus sizes and seed placement")
{
    const auto spec = small_spec();
    const auto data = generate_synthetic(spec);

    const auto per_group = static_cast<std::size_t>(
        spec.seeds_per_class * spec.captures_per_location);
    CHECK(data.corpus.task.size() == per_group);
    CHECK(data.corpus.background.size() == per_group);
    CHECK(data.unlabeled.size() ==
          static_cast<std::size_t>(spec.unlabeled_locations));
    CHECK(data.validation_samples.size() ==
          static_cast<std::size_t>(2 * spec.validation_per_class));
    CHECK(data.ground_truth.size() ==
          2 * per_group + data.unlabeled.size() +
              data.validation_samples.size());

    // Exactly the N seeds carry weight at the start.
    CHECK(sum_alpha(data.corpus.task) == spec.seeds_per_class);
    CHECK(sum_alpha(data.corpus.background) == spec.seeds_per_class);
    for (std::int64_t i = 0; i < spec.seeds_per_class; ++i) {
        const auto& seed = data.corpus.task.samples[static_cast<std::size_t>(i)];
        CHECK(seed.seed_label == ClassTag::task);
        // The seed is the latest capture and always semantically task.
        CHECK(data.ground_truth.at(seed.id) == ClassTag::task);
        CHECK(seed.capture_date == data.corpus.date_ref);
    }

    // Background locations never contain a task-class capture.
    for (const auto& s : data.corpus.background.samples) {
        CHECK(data.ground_truth.at(s.id) == ClassTag::background);
    }

    // Within a task location the semantic class is a monotone step: once a
    // capture is task, every later capture is too.
    for (std::int64_t loc = 0; loc < spec.seeds_per_class; ++loc) {
        std::vector<const Sample*> captures;
        for (const auto& s : data.corpus.task.samples) {
            if (s.location_id == data.corpus.task.samples
                                     [static_cast<std::size_t>(loc)]
                                         .location_id) {
                captures.push_back(&s);
            }
        }
        std::sort(captures.begin(), captures.end(),
                  [](const Sample* a, const Sample* b) {
                      return a->capture_date < b->capture_date;
                  });
        bool seen_task = false;
        for (const auto* s : captures) {
            const bool is_task = data.ground_truth.at(s->id) == ClassTag::task;
            if (seen_task) {
                CHECK(is_task);
            }
            seen_task = seen_task || is_task;
        }
    }
}

TEST_CASE("synthetic generation is deterministic")
{
    const auto spec = small_spec(99);
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    REQUIRE(a.corpus.task.size() == b.corpus.task.size());
    for (std::size_t i = 0; i < a.corpus.task.size(); ++i) {
        CHECK(a.corpus.task.samples[i].id == b.corpus.task.samples[i].id);
        CHECK(a.corpus.task.samples[i].embedding ==
              b.corpus.task.samples[i].embedding);
    }
    auto different = spec;
    different.seed = 100;
    const auto c = generate_synthetic(different);
    CHECK(a.corpus.task.samples[0].embedding !=
          c.corpus.task.samples[0].embedding);
}

TEST_CASE("separation controls how separable the classes are")
{
    auto wide = small_spec(7);
    wide.separation = 6.0;
    wide.validation_per_class = 200;
    const auto wide_data = generate_synthetic(wide);

    // The Bayes classifier thresholds the first coordinate halfway between
    // the class means.
    LinearHead bayes;
    bayes.w.assign(wide.dim, 0.0);
    bayes.w[0] = 1.0;
    bayes.b = -wide.separation / 2.0;
    CHECK(validation_accuracy(bayes, wide_data.validation()) >= 0.98);

    auto flat = wide;
    flat.separation = 0.0;
    const auto flat_data = generate_synthetic(flat);
    const double chance = validation_accuracy(bayes, flat_data.validation());
    CHECK(chance > 0.4);
    CHECK(chance < 0.6);
}

TEST_CASE("degenerate specs are rejected")
{
    auto spec = small_spec();
    spec.seeds_per_class = 0;
    CHECK_THROWS_AS(generate_synthetic(spec), std::out_of_range);
    spec = small_spec();
    spec.prevalence = 0.0;
    CHECK_THROWS_AS(generate_synthetic(spec), std::out_of_range);
    spec = small_spec();
    spec.construction = "gaussian";
    CHECK_THROWS_AS(generate_synthetic(spec), std::out_of_range);
}

TEST_CASE("spec and ground truth files round trip")
{
    TempDir dir;
    auto spec = small_spec(1234);
    spec.noise_rate = 0.05;
    const auto spec_path = (dir.path / "spec.json").string();
    spec.save(spec_path);
    const auto loaded = SyntheticSpec::load(spec_path);
    CHECK(loaded.dim == spec.dim);
    CHECK(loaded.seeds_per_class == spec.seeds_per_class);
    CHECK(loaded.separation == spec.separation);
    CHECK(loaded.noise_rate == spec.noise_rate);
    CHECK(loaded.seed == spec.seed);

    const auto data = generate_synthetic(spec);
    const auto truth_path = (dir.path / "truth.csv").string();
    save_ground_truth(data.ground_truth, truth_path);
    const auto truth = load_ground_truth(truth_path);
    CHECK(truth.size() == data.ground_truth.size());
    for (const auto& [id, cls] : data.ground_truth) {
        CHECK(truth.at(id) == cls);
    }
}

TEST_CASE("bootstrap step with a perfect model")
{
    SeparablePool pool(10, 30);
    const auto before_test = pool.test.size();
    const auto precision =
        bootstrap_step(pool.train, pool.test, pool.head, 5, pool.truth);
    CHECK(precision.p_task == 1.0);
    CHECK(precision.p_background == 1.0);
    CHECK(pool.train.count(ClassTag::task) == 15);
    CHECK(pool.train.count(ClassTag::background) == 15);
    CHECK(pool.test.size() == before_test - 10);

    // Everything moved as task really is task, and vice versa.
    for (std::size_t i = 0; i < pool.train.samples.size(); ++i) {
        CHECK(pool.truth.at(pool.train.samples[i].id) == pool.train.labels[i]);
    }
}

TEST_CASE("bootstrap step edge cases")
{
    SeparablePool pool(2, 3);
    SUBCASE("step zero changes nothing")
    {
        const auto before = pool.test.size();
        const auto p = bootstrap_step(pool.train, pool.test, pool.head, 0,
                                      pool.truth);
        CHECK(!p.p_task.has_value());
        CHECK(!p.p_background.has_value());
        CHECK(pool.test.size() == before);
    }
    SUBCASE("oversized step is a range error")
    {
        CHECK_THROWS_AS(
            bootstrap_step(pool.train, pool.test, pool.head, 4, pool.truth),
            std::out_of_range);
    }
    SUBCASE("a wrong model is charged against precision")
    {
        LinearHead inverted;
        inverted.w = {-1.0};
        const auto p = bootstrap_step(pool.train, pool.test, inverted, 3,
                                      pool.truth);
        CHECK(p.p_task == 0.0);
        CHECK(p.p_background == 0.0);
    }
}

TEST_CASE("bootstrap iterations follow the size bookkeeping")
{
    SeparablePool pool(20, 30);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 3;
    const auto rounds = run_bootstrap_iterations(
        pool.train, {}, pool.test, 10, 2, cfg, pool.truth);
    REQUIRE(rounds.size() == 3);
    const std::int64_t expected_task[] = {20, 30, 40};
    const std::int64_t expected_test[] = {60, 40, 20};
    for (int r = 0; r <= 2; ++r) {
        CHECK(rounds[r].round == r);
        CHECK(rounds[r].train_task == expected_task[r]);
        CHECK(rounds[r].train_background == expected_task[r]);
        CHECK(rounds[r].test_size == expected_test[r]);
        CHECK(rounds[r].test_accuracy == 1.0);
        if (r > 0) {
            CHECK(rounds[r].p_task == 1.0);
            CHECK(rounds[r].p_background == 1.0);
        }
    }

    // One more round would need 20 samples from a 20-sample test set; that
    // still works, but the round after that exhausts it.
    CHECK_THROWS_WITH_AS(
        run_bootstrap_iterations(pool.train, {}, pool.test, 10, 4, cfg,
                                 pool.truth),
        "test set exhausted at round 4", std::out_of_range);
}

TEST_CASE("benchmark rows and CSV")
{
    TempDir dir;
    BenchmarkRow row;
    row.name = "demo";
    row.runs = 3;
    row.supervised_mean = 0.5;
    row.supervised_std = 0.01;
    row.semi_mean = 0.75;
    row.semi_std = 0.005;
    row.delta = 0.25;
    const auto path = (dir.path / "bench.csv").string();
    write_benchmark_csv({row}, path);

    std::ifstream in(path);
    std::string header;
    std::string line;
    REQUIRE(std::getline(in, header));
    CHECK(header ==
          "class,runs,supervised_mean,supervised_std,semi_mean,semi_std,delta");
    REQUIRE(std::getline(in, line));
    CHECK(line == "demo,3,0.500000,0.010000,0.750000,0.005000,0.250000");

    CHECK_THROWS_AS(
        compare_supervised_semisupervised(small_spec(), ssms::Schedule{}, 1, {}),
        std::invalid_argument);
}
