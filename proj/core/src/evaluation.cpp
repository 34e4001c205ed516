#include "archboot/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace archboot::evaluation {

namespace {

using nlohmann::json;

Date months_before(const Date& ref, int months)
{
    const int idx = ref.month_index() - months;
    Date d;
    d.year = idx >= 0 ? idx / 12 : -((-idx + 11) / 12);
    d.month = idx - d.year * 12 + 1;
    d.day = 1;
    return d;
}

std::string padded(const char* prefix, std::int64_t n)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%06lld", prefix,
                  static_cast<long long>(n));
    return buf;
}

struct Generator {
    const SyntheticSpec& spec;
    std::mt19937_64 rng;
    std::normal_distribution<double> normal{0.0, 1.0};

    std::vector<float> draw_embedding(ClassTag cls)
    {
        std::vector<float> e(spec.dim);
        for (std::size_t i = 0; i < spec.dim; ++i) {
            double v = normal(rng);
            if (i == 0 && cls == ClassTag::task) {
                v += spec.separation;
            }
            e[i] = static_cast<float>(v);
        }
        return e;
    }

    /// Embedding for a sample of semantic class cls, with label noise.
    std::vector<float> draw_noisy(ClassTag cls)
    {
        if (spec.noise_rate > 0.0 &&
            std::uniform_real_distribution<double>(0.0, 1.0)(rng) <
                spec.noise_rate) {
            cls = cls == ClassTag::task ? ClassTag::background : ClassTag::task;
        }
        return draw_embedding(cls);
    }
};

double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v)
{
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

} // namespace

double accuracy(const ConfusionCounts& c)
{
    if (c.total() <= 0) {
        throw std::out_of_range("accuracy of an empty confusion table");
    }
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double precision_class(std::int64_t correct, std::int64_t incorrect)
{
    if (correct + incorrect <= 0) {
        throw std::out_of_range("precision over zero samples");
    }
    return static_cast<double>(correct) /
           static_cast<double>(correct + incorrect);
}

void SyntheticSpec::save(const std::string& path) const
{
    json j = {{"dim", dim},
              {"seeds_per_class", seeds_per_class},
              {"separation", separation},
              {"prevalence", prevalence},
              {"unlabeled_locations", unlabeled_locations},
              {"captures_per_location", captures_per_location},
              {"capture_interval_months", capture_interval_months},
              {"construction", construction},
              {"noise_rate", noise_rate},
              {"validation_per_class", validation_per_class},
              {"seed", seed}};
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write spec file " + path);
    }
    out << j.dump(2) << '\n';
}

SyntheticSpec SyntheticSpec::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open spec file " + path);
    }
    json j = json::parse(in);
    SyntheticSpec s;
    s.dim = j.at("dim").get<std::size_t>();
    s.seeds_per_class = j.at("seeds_per_class").get<std::int64_t>();
    s.separation = j.at("separation").get<double>();
    s.prevalence = j.at("prevalence").get<double>();
    s.unlabeled_locations = j.at("unlabeled_locations").get<std::int64_t>();
    s.captures_per_location = j.at("captures_per_location").get<int>();
    s.capture_interval_months = j.at("capture_interval_months").get<int>();
    s.construction = j.value("construction", std::string("uniform"));
    s.noise_rate = j.at("noise_rate").get<double>();
    s.validation_per_class = j.at("validation_per_class").get<std::int64_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

std::vector<LabeledSample> SyntheticData::validation() const
{
    std::vector<LabeledSample> v;
    v.reserve(validation_samples.size());
    for (std::size_t i = 0; i < validation_samples.size(); ++i) {
        v.push_back({&validation_samples[i], validation_labels[i]});
    }
    return v;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec)
{
    if (spec.seeds_per_class <= 0 || spec.captures_per_location <= 0) {
        throw std::out_of_range("degenerate synthetic spec");
    }
    if (!(spec.separation >= 0.0) ||
        !(spec.prevalence > 0.0 && spec.prevalence <= 1.0)) {
        throw std::out_of_range("invalid separation or prevalence");
    }
    if (spec.construction != "uniform") {
        throw std::out_of_range("unknown construction distribution '" +
                                spec.construction + "'");
    }

    Generator gen{spec, std::mt19937_64(spec.seed)};
    SyntheticData data;
    const Date date_ref{2021, 1, 1};
    const int captures = spec.captures_per_location;

    // Tile positions are synthetic but geographically valid: locations sit
    // on a coarse lattice near the origin at zoom 21.
    auto tile_for = [](std::int64_t index) {
        tilegrid::TileKey t;
        t.zoom = 21;
        t.x = static_cast<std::uint32_t>(1u << 20) +
              static_cast<std::uint32_t>(index % 4096);
        t.y = static_cast<std::uint32_t>(1u << 20) +
              static_cast<std::uint32_t>(index / 4096);
        return t;
    };

    std::int64_t tile_index = 0;
    auto build_group = [&](ClassTag tag, const char* loc_prefix) {
        HistoryGroup group;
        group.class_tag = tag;
        std::vector<Sample> historical;
        for (std::int64_t loc = 0; loc < spec.seeds_per_class; ++loc) {
            const std::string location_id = padded(loc_prefix, loc);
            const auto tile = tile_for(tile_index++);
            // Capture k is k * interval months before the reference date;
            // k = 0 is the latest (seed) capture. Task locations gain their
            // feature at a construction capture drawn uniformly, so the seed
            // is always on the task side.
            int construction_k = 0;
            if (tag == ClassTag::task) {
                construction_k = std::uniform_int_distribution<int>(
                    0, captures - 1)(gen.rng);
            }
            for (int k = 0; k < captures; ++k) {
                Sample s;
                s.id = location_id + "_" + std::to_string(k);
                s.location_id = location_id;
                s.tile = tile;
                s.capture_date =
                    months_before(date_ref, k * spec.capture_interval_months);
                const ClassTag semantic =
                    (tag == ClassTag::task && k <= construction_k)
                        ? ClassTag::task
                        : ClassTag::background;
                s.embedding = gen.draw_noisy(semantic);
                data.ground_truth.emplace(s.id, semantic);
                if (k == 0) {
                    s.seed_label = tag;
                    group.samples.push_back(std::move(s));
                } else {
                    historical.push_back(std::move(s));
                }
            }
        }
        // Seeds first, then historical ordered by (location, date).
        std::sort(historical.begin(), historical.end(),
                  [](const Sample& a, const Sample& b) {
                      if (a.location_id != b.location_id) {
                          return a.location_id < b.location_id;
                      }
                      return a.capture_date < b.capture_date;
                  });
        for (auto& s : historical) {
            group.samples.push_back(std::move(s));
        }
        group.alpha.assign(group.samples.size(), 0);
        for (std::int64_t i = 0; i < spec.seeds_per_class; ++i) {
            group.alpha[static_cast<std::size_t>(i)] = 1;
        }
        group.conf.assign(group.samples.size(), 0.0);
        return group;
    };

    data.corpus.task = build_group(ClassTag::task, "T");
    data.corpus.background = build_group(ClassTag::background, "B");
    data.corpus.date_ref = date_ref;
    data.corpus.seed_count = spec.seeds_per_class;

    for (std::int64_t i = 0; i < spec.unlabeled_locations; ++i) {
        const ClassTag semantic =
            std::uniform_real_distribution<double>(0.0, 1.0)(gen.rng) <
                    spec.prevalence
                ? ClassTag::task
                : ClassTag::background;
        Sample s;
        s.id = padded("U", i);
        s.location_id = s.id;
        s.tile = tile_for(tile_index++);
        s.capture_date = date_ref;
        s.embedding = gen.draw_noisy(semantic);
        data.ground_truth.emplace(s.id, semantic);
        data.unlabeled.push_back(std::move(s));
    }

    for (std::int64_t i = 0; i < spec.validation_per_class * 2; ++i) {
        const ClassTag cls =
            i < spec.validation_per_class ? ClassTag::task : ClassTag::background;
        Sample s;
        s.id = padded("V", i);
        s.location_id = s.id;
        s.tile = tile_for(tile_index++);
        s.capture_date = date_ref;
        s.embedding = gen.draw_noisy(cls);
        data.ground_truth.emplace(s.id, cls);
        data.validation_samples.push_back(std::move(s));
        data.validation_labels.push_back(cls);
    }
    return data;
}

void save_ground_truth(const GroundTruth& truth, const std::string& path)
{
    std::vector<std::pair<std::string, ClassTag>> rows(truth.begin(),
                                                       truth.end());
    std::sort(rows.begin(), rows.end());
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write ground truth file " + path);
    }
    out << "id,class\n";
    for (const auto& [id, cls] : rows) {
        out << id << ',' << to_string(cls) << '\n';
    }
}

GroundTruth load_ground_truth(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open ground truth file " + path);
    }
    GroundTruth truth;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (lineno == 1 || line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError(path, lineno, "expected id,class");
        }
        truth.emplace(line.substr(0, comma),
                      class_tag_from_string(line.substr(comma + 1)));
    }
    return truth;
}

ConfusionCounts confusion_counts(const LinearHead& head,
                                 std::span<const Sample> samples,
                                 const GroundTruth& truth)
{
    ConfusionCounts c;
    for (const auto& s : samples) {
        auto it = truth.find(s.id);
        if (it == truth.end()) {
            throw std::runtime_error("no ground truth for sample id " + s.id);
        }
        const bool actual_task = it->second == ClassTag::task;
        const bool predicted_task =
            predict_confidence(head, s.embedding) >= 0.5;
        if (predicted_task && actual_task) {
            ++c.tp;
        } else if (predicted_task && !actual_task) {
            ++c.fp;
        } else if (!predicted_task && actual_task) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

std::int64_t LabeledPool::count(ClassTag tag) const
{
    return std::count(labels.begin(), labels.end(), tag);
}

std::vector<LabeledSample> LabeledPool::view() const
{
    std::vector<LabeledSample> v;
    v.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        v.push_back({&samples[i], labels[i]});
    }
    return v;
}

BootstrapPrecision bootstrap_step(LabeledPool& train, std::vector<Sample>& test,
                                  const LinearHead& head,
                                  std::int64_t step_size,
                                  const GroundTruth& truth)
{
    if (step_size < 0 ||
        2 * step_size > static_cast<std::int64_t>(test.size())) {
        throw std::out_of_range("step size " + std::to_string(step_size) +
                                " too large for test set of " +
                                std::to_string(test.size()));
    }
    if (step_size == 0) {
        return {};
    }

    struct Scored {
        double conf;
        std::size_t index;
    };
    std::vector<Scored> scored;
    scored.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        scored.push_back({predict_confidence(head, test[i].embedding), i});
    }
    // Highest task confidence first; ties broken by sample id for
    // reproducibility.
    std::sort(scored.begin(), scored.end(),
              [&test](const Scored& a, const Scored& b) {
                  if (a.conf != b.conf) {
                      return a.conf > b.conf;
                  }
                  return test[a.index].id < test[b.index].id;
              });

    const auto n = static_cast<std::size_t>(step_size);
    std::vector<bool> moved(test.size(), false);
    std::int64_t task_correct = 0;
    std::int64_t background_correct = 0;
    auto move_one = [&](std::size_t index, ClassTag label) {
        moved[index] = true;
        const bool correct = truth.at(test[index].id) == label;
        (label == ClassTag::task ? task_correct : background_correct) +=
            correct;
        train.samples.push_back(test[index]);
        train.labels.push_back(label);
    };
    for (std::size_t r = 0; r < n; ++r) {
        move_one(scored[r].index, ClassTag::task);
    }
    for (std::size_t r = 0; r < n; ++r) {
        move_one(scored[scored.size() - 1 - r].index, ClassTag::background);
    }

    std::vector<Sample> remaining;
    remaining.reserve(test.size() - 2 * n);
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (!moved[i]) {
            remaining.push_back(std::move(test[i]));
        }
    }
    test = std::move(remaining);

    BootstrapPrecision precision;
    precision.p_task =
        precision_class(task_correct, step_size - task_correct);
    precision.p_background =
        precision_class(background_correct, step_size - background_correct);
    return precision;
}

namespace {

/// Flat labeled pool viewed as a two-group corpus with unit alphas.
WeightedCorpus pool_as_corpus(const LabeledPool& pool)
{
    WeightedCorpus corpus;
    corpus.task.class_tag = ClassTag::task;
    corpus.background.class_tag = ClassTag::background;
    for (std::size_t i = 0; i < pool.samples.size(); ++i) {
        auto& group =
            pool.labels[i] == ClassTag::task ? corpus.task : corpus.background;
        group.samples.push_back(pool.samples[i]);
    }
    for (auto* group : {&corpus.task, &corpus.background}) {
        group->alpha.assign(group->samples.size(), 1);
        group->conf.assign(group->samples.size(), 0.0);
    }
    corpus.date_ref = Date{2021, 1, 1};
    corpus.seed_count = 0;
    return corpus;
}

} // namespace

std::vector<BootstrapRound> run_bootstrap_iterations(
    LabeledPool train, std::span<const LabeledSample> validation,
    std::vector<Sample> test, std::int64_t step_size, int rounds,
    const TrainConfig& cfg, const GroundTruth& truth)
{
    std::vector<BootstrapRound> reports;
    LinearHead current;
    auto snapshot = [&](int round, const BootstrapPrecision& precision) {
        BootstrapRound r;
        r.round = round;
        r.train_task = train.count(ClassTag::task);
        r.train_background = train.count(ClassTag::background);
        r.test_size = static_cast<std::int64_t>(test.size());
        r.test_accuracy =
            test.empty() ? 0.0
                         : accuracy(confusion_counts(current, test, truth));
        r.p_task = precision.p_task;
        r.p_background = precision.p_background;
        return r;
    };

    {
        TrainConfig round_cfg = cfg;
        round_cfg.seed = ssms::step_seed(cfg.seed, 0);
        current = archboot::train(pool_as_corpus(train), round_cfg, validation).head;
        reports.push_back(snapshot(0, {}));
    }

    for (int round = 1; round <= rounds; ++round) {
        if (2 * step_size > static_cast<std::int64_t>(test.size())) {
            throw std::out_of_range("test set exhausted at round " +
                                    std::to_string(round));
        }
        auto precision = bootstrap_step(train, test, current, step_size, truth);
        TrainConfig round_cfg = cfg;
        round_cfg.seed = ssms::step_seed(cfg.seed, round);
        current = archboot::train(pool_as_corpus(train), round_cfg, validation).head;
        reports.push_back(snapshot(round, precision));
    }
    return reports;
}

BenchmarkRow compare_supervised_semisupervised(const SyntheticSpec& spec,
                                               const ssms::Schedule& schedule,
                                               int runs,
                                               const TrainConfig& base_cfg,
                                               const std::string& name)
{
    if (runs < 2) {
        throw std::invalid_argument("benchmark needs at least 2 runs");
    }
    const auto data = generate_synthetic(spec);
    const auto validation = data.validation();

    std::vector<double> supervised;
    std::vector<double> semi;
    for (int r = 0; r < runs; ++r) {
        TrainConfig cfg = base_cfg;
        cfg.seed = ssms::step_seed(base_cfg.seed, 1000 + r);

        // Baseline: seeds only, alphas as initialized.
        WeightedCorpus baseline = data.corpus;
        auto trained = archboot::train(baseline, cfg, validation);
        supervised.push_back(validation_accuracy(trained.head, validation));

        WeightedCorpus curated = data.corpus;
        ssms::RunOptions options;
        options.train = cfg;
        auto run = ssms::run_schedule(curated, schedule, validation, options);
        semi.push_back(run.final_validation_accuracy);
    }

    BenchmarkRow row;
    row.name = name;
    row.runs = runs;
    row.supervised_mean = mean_of(supervised);
    row.supervised_std = sample_std(supervised);
    row.semi_mean = mean_of(semi);
    row.semi_std = sample_std(semi);
    row.delta = row.semi_mean - row.supervised_mean;
    return row;
}

void write_benchmark_csv(const std::vector<BenchmarkRow>& rows,
                         const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write benchmark report " + path);
    }
    out << "class,runs,supervised_mean,supervised_std,semi_mean,semi_std,"
           "delta\n";
    char buf[256];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      row.name.c_str(), row.runs, row.supervised_mean,
                      row.supervised_std, row.semi_mean, row.semi_std,
                      row.delta);
        out << buf;
    }
}

} // namespace archboot::evaluation
