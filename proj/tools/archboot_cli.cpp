// Command-line shell around the curation engine: synthetic data generation,
// training, sharded scoring, schedule runs, bootstrapping, evaluation,
// benchmarking, GIS export and tile utilities.

#include "archboot/corpus.hpp"
#include "archboot/evaluation.hpp"
#include "archboot/linear_head.hpp"
#include "archboot/pipeline.hpp"
#include "archboot/selection.hpp"
#include "archboot/ssms.hpp"
#include "archboot/temporal.hpp"
#include "archboot/tilegrid.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace archboot;
namespace fs = std::filesystem;
using nlohmann::json;

struct DataDir {
    std::string root;

    std::string labels() const { return (fs::path(root) / "labels.csv").string(); }
    std::string embeddings() const { return (fs::path(root) / "embeddings.aemb").string(); }
    std::string state() const { return (fs::path(root) / "state.jsonl").string(); }
    std::string validation() const { return (fs::path(root) / "validation.csv").string(); }
    std::string ground_truth() const { return (fs::path(root) / "ground_truth.csv").string(); }
};

CorpusPaths corpus_paths(const DataDir& dir, bool with_state)
{
    CorpusPaths paths;
    paths.labels_csv = dir.labels();
    paths.embeddings_bin = dir.embeddings();
    if (with_state && fs::exists(dir.state())) {
        paths.state_jsonl = dir.state();
    }
    return paths;
}

struct ValidationSet {
    std::vector<Sample> samples;
    std::vector<ClassTag> labels;

    std::vector<LabeledSample> view() const
    {
        std::vector<LabeledSample> v;
        v.reserve(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            v.push_back({&samples[i], labels[i]});
        }
        return v;
    }
};

ValidationSet load_validation(const DataDir& dir)
{
    ValidationSet set;
    std::ifstream in(dir.validation());
    if (!in) {
        return set; // optional
    }
    auto [dim, table] = read_embeddings(dir.embeddings());
    (void)dim;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError(dir.validation(), lineno, "expected id,class");
        }
        Sample s;
        s.id = line.substr(0, comma);
        s.location_id = s.id;
        auto it = table.find(s.id);
        if (it == table.end()) {
            throw std::runtime_error("no embedding for validation id " + s.id);
        }
        s.embedding = it->second;
        set.labels.push_back(class_tag_from_string(line.substr(comma + 1)));
        set.samples.push_back(std::move(s));
    }
    return set;
}

void write_synthetic(const evaluation::SyntheticData& data, const DataDir& dir)
{
    fs::create_directories(dir.root);
    LoadedCorpus loaded;
    loaded.corpus = data.corpus;
    loaded.unlabeled = data.unlabeled;
    CorpusPaths paths = corpus_paths(dir, false);
    paths.state_jsonl = dir.state();
    save_corpus(loaded, paths);

    // Validation embeddings live in the shared embeddings file.
    {
        auto [dim, table] = read_embeddings(dir.embeddings());
        std::vector<std::pair<std::string, std::vector<float>>> records;
        records.reserve(table.size() + data.validation_samples.size());
        std::vector<std::string> ids;
        ids.reserve(table.size());
        for (const auto& [id, values] : table) {
            ids.push_back(id);
        }
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            records.emplace_back(id, table.at(id));
        }
        for (const auto& s : data.validation_samples) {
            records.emplace_back(s.id, s.embedding);
        }
        write_embeddings(dir.embeddings(), static_cast<std::uint32_t>(dim),
                         records);
    }
    {
        std::ofstream out(dir.validation());
        out << "id,class\n";
        for (std::size_t i = 0; i < data.validation_samples.size(); ++i) {
            out << data.validation_samples[i].id << ','
                << to_string(data.validation_labels[i]) << '\n';
        }
    }
    evaluation::save_ground_truth(data.ground_truth, dir.ground_truth());
}

std::string state_dir_option(std::string flag_value)
{
    if (!flag_value.empty()) {
        return flag_value;
    }
    if (const char* env = std::getenv("ARCHBOOT_STATE_DIR")) {
        return env;
    }
    return {};
}

ssms::ScoreFn make_scorer(const std::string& spec)
{
    if (spec == "builtin") {
        return ssms::builtin_scorer();
    }
    if (spec.rfind("external:", 0) == 0) {
        const std::string dir = spec.substr(9);
        return [dir](const LinearHead& model, std::span<const Sample> samples) {
            // The exchange directory owns the model hand-off.
            model.save((fs::path(dir) / "model.json").string());
            return score_with_external(samples, {dir});
        };
    }
    throw CLI::ValidationError("--scorer must be builtin or external:<dir>");
}

void print_reports(const std::vector<ssms::IterationReport>& reports)
{
    std::cout << "step,task_inc,background_inc,confounder_inc,sum_alpha_task,"
                 "sum_alpha_background,val_acc\n";
    for (const auto& r : reports) {
        std::printf("%d,%zu,%zu,%zu,%lld,%lld,%.4f\n", r.step_index,
                    r.task_increments, r.background_increments,
                    r.confounder_increments,
                    static_cast<long long>(r.sum_alpha_task),
                    static_cast<long long>(r.sum_alpha_background),
                    r.validation_accuracy);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"archboot - archival semi-supervised dataset curation"};
    app.require_subcommand(1);

    std::string data_dir_flag;
    std::string state_dir_flag;
    app.add_option("--state-dir", state_dir_flag,
                   "state directory (overrides ARCHBOOT_STATE_DIR)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string synth_spec_path;
    std::string synth_out;
    std::uint64_t synth_seed = 0;
    bool synth_seed_set = false;
    synth->add_option("--spec", synth_spec_path, "SyntheticSpec JSON file")
        ->required();
    synth->add_option("--out-dir", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed, "override the spec seed")
        ->each([&](const std::string&) { synth_seed_set = true; });

    // train
    auto* train_cmd = app.add_subcommand("train", "train the frozen linear head");
    std::string train_out = "model.json";
    TrainConfig train_cfg;
    train_cmd->add_option("--data-dir", data_dir_flag)->required();
    train_cmd->add_option("--out", train_out, "model output path");
    train_cmd->add_option("--lr", train_cfg.learning_rate);
    train_cmd->add_option("--epochs", train_cfg.epochs);
    train_cmd->add_option("--batch-size", train_cfg.batch_size);
    train_cmd->add_option("--seed", train_cfg.seed);

    // score
    auto* score_cmd = app.add_subcommand("score", "sharded scoring of the unlabeled pool");
    std::string score_model;
    std::string score_out;
    std::size_t score_shards = 1;
    std::size_t score_workers = 0;
    std::string score_scorer = "builtin";
    score_cmd->add_option("--data-dir", data_dir_flag)->required();
    score_cmd->add_option("--model", score_model)->required();
    score_cmd->add_option("--out-dir", score_out)->required();
    score_cmd->add_option("--shards", score_shards);
    score_cmd->add_option("--workers", score_workers,
                          "worker threads (default: machine parallelism)");
    score_cmd->add_option("--scorer", score_scorer, "builtin|external:<dir>");

    // step
    auto* step_cmd = app.add_subcommand("step", "run one semi-supervised model step");
    ssms::ScheduleStep one_step;
    TrainConfig step_cfg;
    step_cmd->add_option("--data-dir", data_dir_flag)->required();
    step_cmd->add_option("--d-t", one_step.d_t)->required();
    step_cmd->add_option("--d-b", one_step.d_b)->required();
    step_cmd->add_option("--m-t", one_step.m_t)->required();
    step_cmd->add_option("--m-b", one_step.m_b)->required();
    step_cmd->add_option("--m-c", one_step.m_c)->required();
    step_cmd->add_option("--lr", step_cfg.learning_rate);
    step_cmd->add_option("--epochs", step_cfg.epochs);
    step_cmd->add_option("--batch-size", step_cfg.batch_size);
    step_cmd->add_option("--seed", step_cfg.seed);

    // run
    auto* run_cmd = app.add_subcommand("run", "run a full schedule");
    std::string run_schedule_path;
    std::string run_resume;
    std::string run_id = "run";
    std::string run_scorer = "builtin";
    TrainConfig run_cfg;
    run_cmd->add_option("--data-dir", data_dir_flag)->required();
    run_cmd->add_option("--schedule", run_schedule_path,
                        "schedule CSV (default: the published six steps)");
    run_cmd->add_option("--seed", run_cfg.seed);
    run_cmd->add_option("--resume", run_resume, "manifest to resume from");
    run_cmd->add_option("--run-id", run_id);
    run_cmd->add_option("--scorer", run_scorer, "builtin|external:<dir>");
    run_cmd->add_option("--lr", run_cfg.learning_rate);
    run_cmd->add_option("--epochs", run_cfg.epochs);
    run_cmd->add_option("--batch-size", run_cfg.batch_size);

    // bootstrap
    auto* boot_cmd = app.add_subcommand("bootstrap", "test-to-train bootstrap iterations");
    std::int64_t boot_step_size = 500;
    int boot_rounds = 1;
    TrainConfig boot_cfg;
    boot_cmd->add_option("--data-dir", data_dir_flag)->required();
    boot_cmd->add_option("--step-size", boot_step_size);
    boot_cmd->add_option("--rounds", boot_rounds);
    boot_cmd->add_option("--seed", boot_cfg.seed);
    boot_cmd->add_option("--lr", boot_cfg.learning_rate);
    boot_cmd->add_option("--epochs", boot_cfg.epochs);
    boot_cmd->add_option("--batch-size", boot_cfg.batch_size);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "confusion metrics against ground truth");
    std::string eval_model;
    eval_cmd->add_option("--data-dir", data_dir_flag)->required();
    eval_cmd->add_option("--model", eval_model)->required();

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "supervised vs semi-supervised comparison");
    std::vector<std::string> bench_specs;
    std::string bench_out = "benchmark.csv";
    std::string bench_schedule_path;
    int bench_runs = 5;
    TrainConfig bench_cfg;
    bench_cmd->add_option("--spec", bench_specs, "SyntheticSpec JSON file(s)")
        ->required();
    bench_cmd->add_option("--schedule", bench_schedule_path);
    bench_cmd->add_option("--runs", bench_runs);
    bench_cmd->add_option("--out", bench_out);
    bench_cmd->add_option("--seed", bench_cfg.seed);
    bench_cmd->add_option("--lr", bench_cfg.learning_rate);
    bench_cmd->add_option("--epochs", bench_cfg.epochs);
    bench_cmd->add_option("--batch-size", bench_cfg.batch_size);

    // export-gis
    auto* gis_cmd = app.add_subcommand("export-gis", "GeoJSON layer of first detections");
    double gis_threshold = 0.5;
    std::string gis_out = "detections.geojson";
    gis_cmd->add_option("--data-dir", data_dir_flag)->required();
    gis_cmd->add_option("--threshold", gis_threshold);
    gis_cmd->add_option("--out", gis_out);

    // tile
    auto* tile_cmd = app.add_subcommand("tile", "web-mercator grid utilities");
    int tile_zoom = 21;
    double tile_lat = 0.0;
    double tile_lon = 0.0;
    std::int64_t tile_area_tiles = -1;
    bool has_latlon = false;
    tile_cmd->add_option("--zoom", tile_zoom);
    tile_cmd->add_option("--lat", tile_lat)->each([&](const std::string&) {
        has_latlon = true;
    });
    tile_cmd->add_option("--lon", tile_lon);
    tile_cmd->add_option("--area-tiles", tile_area_tiles,
                         "coverage area of this many tiles");

    CLI11_PARSE(app, argc, argv);

    try {
        const std::string state_dir = state_dir_option(state_dir_flag);

        if (*synth) {
            auto spec = evaluation::SyntheticSpec::load(synth_spec_path);
            if (synth_seed_set) {
                spec.seed = synth_seed;
            }
            const auto data = evaluation::generate_synthetic(spec);
            write_synthetic(data, DataDir{synth_out});
            std::cout << "wrote synthetic corpus: task="
                      << data.corpus.task.size()
                      << " background=" << data.corpus.background.size()
                      << " unlabeled=" << data.unlabeled.size()
                      << " validation=" << data.validation_samples.size()
                      << '\n';
        } else if (*train_cmd) {
            const DataDir dir{data_dir_flag};
            auto loaded = load_corpus(corpus_paths(dir, true));
            const auto validation = load_validation(dir);
            auto result = train(loaded.corpus, train_cfg, validation.view());
            result.head.save(train_out);
            std::cout << "best_epoch=" << result.best_epoch << " val_acc="
                      << result.metrics[static_cast<std::size_t>(
                                            result.best_epoch)]
                             .validation_accuracy
                      << '\n';
        } else if (*score_cmd) {
            const DataDir dir{data_dir_flag};
            auto loaded = load_corpus(corpus_paths(dir, true));
            const auto model = LinearHead::load(score_model);
            std::vector<std::string> ids;
            ids.reserve(loaded.unlabeled.size());
            for (const auto& s : loaded.unlabeled) {
                ids.push_back(s.id);
            }
            const auto plan = pipeline::plan_shards(ids, score_shards);
            if (score_scorer == "builtin") {
                auto output = pipeline::parallel_score(
                    loaded.unlabeled, model, plan, score_out, score_workers);
                std::cout << "merged scores: " << output.merged_path << '\n';
            } else {
                auto scorer = make_scorer(score_scorer);
                auto confs = scorer(model, loaded.unlabeled);
                fs::create_directories(score_out);
                const auto merged =
                    (fs::path(score_out) / "scores.jsonl").string();
                std::ofstream out(merged, std::ios::binary);
                for (std::size_t i = 0; i < confs.size(); ++i) {
                    json record = {{"id", loaded.unlabeled[i].id},
                                   {"conf", confs[i]}};
                    out << record.dump() << '\n';
                }
                std::cout << "merged scores: " << merged << '\n';
            }
        } else if (*step_cmd) {
            const DataDir dir{data_dir_flag};
            std::optional<pipeline::StateLock> lock;
            if (!state_dir.empty()) {
                lock.emplace(state_dir);
            }
            auto loaded = load_corpus(corpus_paths(dir, true));
            const auto validation = load_validation(dir);
            auto report = ssms::ssms_step(loaded.corpus, one_step, step_cfg,
                                          validation.view(), 1);
            save_state(loaded.corpus, dir.state());
            print_reports({report});
        } else if (*run_cmd) {
            const DataDir dir{data_dir_flag};
            std::optional<pipeline::StateLock> lock;
            if (!state_dir.empty()) {
                lock.emplace(state_dir);
            }
            auto schedule = run_schedule_path.empty()
                                ? ssms::Schedule::default_schedule()
                                : ssms::Schedule::load_csv(run_schedule_path);
            auto loaded = load_corpus(corpus_paths(dir, true));
            const auto validation = load_validation(dir);

            int resume_after = 0;
            ssms::RunOptions options;
            options.train = run_cfg;
            options.state_dir = state_dir;
            options.run_id = run_id;
            options.scorer = make_scorer(run_scorer);
            if (!run_resume.empty()) {
                const auto manifest = ssms::Manifest::load(run_resume);
                load_state(loaded.corpus, manifest.corpus_state_path);
                options.train.seed = manifest.seed;
                options.run_id = manifest.run_id;
                schedule.steps = manifest.schedule;
                resume_after = manifest.step;
            }
            auto result = ssms::run_schedule(loaded.corpus, schedule,
                                             validation.view(), options,
                                             resume_after);
            save_state(loaded.corpus, dir.state());
            print_reports(result.reports);
            std::cout << "final_val_acc=" << result.final_validation_accuracy
                      << '\n';
        } else if (*boot_cmd) {
            const DataDir dir{data_dir_flag};
            auto loaded = load_corpus(corpus_paths(dir, true));
            const auto validation = load_validation(dir);
            const auto truth =
                evaluation::load_ground_truth(dir.ground_truth());

            evaluation::LabeledPool train_pool;
            for (const auto* group :
                 {&loaded.corpus.task, &loaded.corpus.background}) {
                for (std::size_t i = 0; i < group->size(); ++i) {
                    if (group->alpha[i] >= 1) {
                        train_pool.samples.push_back(group->samples[i]);
                        train_pool.labels.push_back(group->class_tag);
                    }
                }
            }
            auto reports = evaluation::run_bootstrap_iterations(
                std::move(train_pool), validation.view(),
                loaded.unlabeled, boot_step_size, boot_rounds, boot_cfg,
                truth);
            std::cout << "round,train_task,train_background,test,"
                         "test_acc,p_task,p_background\n";
            for (const auto& r : reports) {
                std::printf("%d,%lld,%lld,%lld,%.4f,%s,%s\n", r.round,
                            static_cast<long long>(r.train_task),
                            static_cast<long long>(r.train_background),
                            static_cast<long long>(r.test_size),
                            r.test_accuracy,
                            r.p_task ? std::to_string(*r.p_task).c_str() : "-",
                            r.p_background
                                ? std::to_string(*r.p_background).c_str()
                                : "-");
            }
        } else if (*eval_cmd) {
            const DataDir dir{data_dir_flag};
            auto loaded = load_corpus(corpus_paths(dir, true));
            const auto truth =
                evaluation::load_ground_truth(dir.ground_truth());
            const auto model = LinearHead::load(eval_model);
            const auto counts = evaluation::confusion_counts(
                model, loaded.unlabeled, truth);
            std::printf("tp=%lld tn=%lld fp=%lld fn=%lld accuracy=%.4f\n",
                        static_cast<long long>(counts.tp),
                        static_cast<long long>(counts.tn),
                        static_cast<long long>(counts.fp),
                        static_cast<long long>(counts.fn),
                        evaluation::accuracy(counts));
        } else if (*bench_cmd) {
            auto schedule = bench_schedule_path.empty()
                                ? ssms::Schedule::default_schedule()
                                : ssms::Schedule::load_csv(bench_schedule_path);
            std::vector<evaluation::BenchmarkRow> rows;
            for (const auto& spec_path : bench_specs) {
                const auto spec = evaluation::SyntheticSpec::load(spec_path);
                rows.push_back(evaluation::compare_supervised_semisupervised(
                    spec, schedule, bench_runs, bench_cfg,
                    fs::path(spec_path).stem().string()));
            }
            evaluation::write_benchmark_csv(rows, bench_out);
            std::cout << "wrote " << bench_out << '\n';
        } else if (*gis_cmd) {
            const DataDir dir{data_dir_flag};
            auto loaded = load_corpus(corpus_paths(dir, true));
            const auto count = pipeline::export_gis(loaded.corpus,
                                                    gis_threshold, gis_out);
            std::cout << "wrote " << count << " features to " << gis_out
                      << '\n';
        } else if (*tile_cmd) {
            if (tile_area_tiles >= 0) {
                std::printf("coverage_km2=%.3f\n",
                            tilegrid::coverage_area_km2(tile_area_tiles,
                                                        tile_zoom));
            } else if (has_latlon) {
                const auto t = tilegrid::latlon_to_tile(
                    {tile_lat, tile_lon}, tile_zoom);
                const auto nw = tilegrid::tile_to_latlon(t);
                std::printf("x=%u y=%u zoom=%d nw_lat=%.6f nw_lon=%.6f\n",
                            t.x, t.y, t.zoom, nw.lat, nw.lon);
            } else {
                std::printf("edge_m=%.3f m_per_px=%.6f\n",
                            tilegrid::tile_edge_meters(tile_zoom),
                            tilegrid::meters_per_pixel(tile_zoom));
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
