#include "archboot/ssms.hpp"

#include "archboot/selection.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace archboot::ssms {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string now_iso8601()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void refresh_confidences(WeightedCorpus& corpus, const LinearHead& model,
                         const ScoreFn& scorer)
{
    auto score_group = [&](HistoryGroup& group) {
        auto confs = scorer(model, group.samples);
        if (confs.size() != group.size()) {
            throw std::runtime_error("scorer returned " +
                                     std::to_string(confs.size()) +
                                     " confidences for a group of " +
                                     std::to_string(group.size()));
        }
        for (double c : confs) {
            if (!(c >= 0.0 && c <= 1.0)) {
                throw std::runtime_error("scorer confidence outside [0,1]");
            }
        }
        group.conf = std::move(confs);
    };
    score_group(corpus.task);
    score_group(corpus.background);
}

json step_to_json(const ScheduleStep& s)
{
    return {{"d_t", s.d_t}, {"d_b", s.d_b}, {"m_t", s.m_t},
            {"m_b", s.m_b}, {"m_c", s.m_c}};
}

ScheduleStep step_from_json(const json& j)
{
    ScheduleStep s;
    s.d_t = j.at("d_t").get<int>();
    s.d_b = j.at("d_b").get<int>();
    s.m_t = j.at("m_t").get<std::size_t>();
    s.m_b = j.at("m_b").get<std::size_t>();
    s.m_c = j.at("m_c").get<std::size_t>();
    return s;
}

} // namespace

std::uint64_t step_seed(std::uint64_t base_seed, int step_index)
{
    return splitmix64(base_seed ^
                      (static_cast<std::uint64_t>(step_index) *
                       0x9e3779b97f4a7c15ull));
}

ScoreFn builtin_scorer()
{
    return [](const LinearHead& model, std::span<const Sample> samples) {
        std::vector<double> confs;
        confs.reserve(samples.size());
        for (const auto& s : samples) {
            confs.push_back(predict_confidence(model, s.embedding));
        }
        return confs;
    };
}

Schedule Schedule::default_schedule()
{
    return Schedule{{
        {6, 24, 0, 0, 500},
        {6, 24, 50, 0, 500},
        {12, 24, 100, 0, 500},
        {12, 24, 150, 0, 500},
        {24, 48, 150, 250, 0},
        {48, 84, 350, 350, 0},
    }};
}

Schedule Schedule::load_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open schedule file " + path);
    }
    Schedule schedule;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (lineno == 1) {
            if (line != "d_t,d_b,m_t,m_b,m_c") {
                throw ParseError(path, 1, "unexpected header '" + line + "'");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<long long> values;
        while (std::getline(ss, field, ',')) {
            long long v = 0;
            auto [ptr, ec] =
                std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || ptr != field.data() + field.size() ||
                v < 0) {
                throw ParseError(path, lineno, "bad value '" + field + "'");
            }
            values.push_back(v);
        }
        if (values.size() != 5) {
            throw ParseError(path, lineno, "expected 5 fields");
        }
        schedule.steps.push_back({static_cast<int>(values[0]),
                                  static_cast<int>(values[1]),
                                  static_cast<std::size_t>(values[2]),
                                  static_cast<std::size_t>(values[3]),
                                  static_cast<std::size_t>(values[4])});
    }
    if (schedule.steps.empty()) {
        throw std::runtime_error(path + ": empty schedule");
    }
    return schedule;
}

void Schedule::save_csv(const std::string& path) const
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write schedule file " + path);
    }
    out << "d_t,d_b,m_t,m_b,m_c\n";
    for (const auto& s : steps) {
        out << s.d_t << ',' << s.d_b << ',' << s.m_t << ',' << s.m_b << ','
            << s.m_c << '\n';
    }
}

IterationReport ssms_step(WeightedCorpus& corpus, const ScheduleStep& step,
                          const TrainConfig& cfg,
                          std::span<const LabeledSample> validation,
                          int step_index, const ScoreFn& scorer)
{
    auto trained = train(corpus, cfg, validation);
    refresh_confidences(corpus, trained.head, scorer);

    std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xa5a5a5a5a5a5a5a5ull));
    IterationReport report;
    report.step_index = step_index;
    report.task_increments =
        selection::update_task(corpus, step.m_t, step.d_t, rng);
    report.background_increments =
        selection::update_background(corpus, step.m_b, step.d_b, rng);
    report.confounder_increments =
        selection::update_confounders(corpus, step.m_c, step.d_b, rng);
    report.sum_alpha_task = sum_alpha(corpus.task);
    report.sum_alpha_background = sum_alpha(corpus.background);
    report.validation_accuracy =
        validation_accuracy(trained.head, validation);
    return report;
}

void finalize(WeightedCorpus& corpus)
{
    for (auto& a : corpus.background.alpha) {
        ++a;
    }
}

void Manifest::save(const std::string& path) const
{
    json steps_json = json::array();
    for (const auto& s : schedule) {
        steps_json.push_back(step_to_json(s));
    }
    json j = {{"run_id", run_id},
              {"step", step},
              {"schedule", steps_json},
              {"seed", seed},
              {"sum_alpha_task", sum_alpha_task},
              {"sum_alpha_background", sum_alpha_background},
              {"corpus_state_path", corpus_state_path},
              {"model_path", model_path},
              {"timestamp", timestamp}};
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write manifest " + path);
    }
    out << j.dump(2) << '\n';
}

Manifest Manifest::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open manifest " + path);
    }
    json j = json::parse(in);
    Manifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.step = j.at("step").get<int>();
    for (const auto& s : j.at("schedule")) {
        m.schedule.push_back(step_from_json(s));
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.sum_alpha_task = j.at("sum_alpha_task").get<std::int64_t>();
    m.sum_alpha_background = j.at("sum_alpha_background").get<std::int64_t>();
    m.corpus_state_path = j.at("corpus_state_path").get<std::string>();
    m.model_path = j.at("model_path").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::string>();
    return m;
}

RunResult run_schedule(WeightedCorpus& corpus, const Schedule& schedule,
                       std::span<const LabeledSample> validation,
                       const RunOptions& options, int resume_after_step)
{
    RunResult result;
    IterationReport initial;
    initial.step_index = 0;
    initial.sum_alpha_task = sum_alpha(corpus.task);
    initial.sum_alpha_background = sum_alpha(corpus.background);
    result.reports.push_back(initial);

    const bool persist = !options.state_dir.empty();
    auto checkpoint = [&](int step_index, const LinearHead* model) {
        if (!persist) {
            return;
        }
        fs::create_directories(options.state_dir);
        const fs::path dir(options.state_dir);
        const std::string stem =
            options.run_id + "_step" + std::to_string(step_index);
        Manifest m;
        m.run_id = options.run_id;
        m.step = step_index;
        m.schedule = schedule.steps;
        m.seed = options.train.seed;
        m.sum_alpha_task = sum_alpha(corpus.task);
        m.sum_alpha_background = sum_alpha(corpus.background);
        m.corpus_state_path = (dir / (stem + ".state.jsonl")).string();
        m.timestamp = now_iso8601();
        save_state(corpus, m.corpus_state_path);
        if (model != nullptr) {
            m.model_path = (dir / (stem + ".model.json")).string();
            model->save(m.model_path);
        }
        m.save((dir / (options.run_id + "_manifest.json")).string());
    };

    const int total_steps = static_cast<int>(schedule.steps.size());
    for (int k = resume_after_step + 1; k <= total_steps; ++k) {
        TrainConfig cfg = options.train;
        cfg.seed = step_seed(options.train.seed, k);
        auto report = ssms_step(corpus, schedule.steps[static_cast<std::size_t>(k - 1)],
                                cfg, validation, k, options.scorer);
        result.reports.push_back(report);
        checkpoint(k, nullptr);
    }

    finalize(corpus);
    TrainConfig final_cfg = options.train;
    final_cfg.seed = step_seed(options.train.seed, total_steps + 1);
    auto final_trained = train(corpus, final_cfg, validation);
    result.final_model = final_trained.head;
    result.final_validation_accuracy =
        validation_accuracy(final_trained.head, validation);
    checkpoint(total_steps + 1, &result.final_model);
    return result;
}

} // namespace archboot::ssms
