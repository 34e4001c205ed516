#ifndef ARCHBOOT_EVALUATION_HPP
#define ARCHBOOT_EVALUATION_HPP

#include "archboot/corpus.hpp"
#include "archboot/linear_head.hpp"
#include "archboot/ssms.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace archboot::evaluation {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + tn + fp + fn; }
};

/// (TP + TN) / total. Throws std::out_of_range on an empty count.
double accuracy(const ConfusionCounts& c);

/// correct / (correct + incorrect). Throws std::out_of_range when both are 0.
double precision_class(std::int64_t correct, std::int64_t incorrect);

/// Parameters of a synthetic archival corpus. Embeddings are isotropic
/// unit-variance Gaussians around two class means `separation` apart, so the
/// Bayes error is known in closed form.
struct SyntheticSpec {
    std::size_t dim = 16;
    std::int64_t seeds_per_class = 100;     // N labeled locations per class
    double separation = 4.0;                // distance between class means, in sigma
    double prevalence = 0.3;                // task fraction of the unlabeled pool
    std::int64_t unlabeled_locations = 200;
    int captures_per_location = 6;
    int capture_interval_months = 12;
    std::string construction = "uniform";   // construction-date distribution
    double noise_rate = 0.0;                // embedding drawn from the wrong class
    std::int64_t validation_per_class = 100;
    std::uint64_t seed = 0;

    void save(const std::string& path) const;
    static SyntheticSpec load(const std::string& path);
};

/// True semantic class per sample id. Kept in a side table the curation
/// pipeline never reads; only evaluation consults it.
using GroundTruth = std::unordered_map<std::string, ClassTag>;

struct SyntheticData {
    WeightedCorpus corpus;
    std::vector<Sample> unlabeled;
    std::vector<Sample> validation_samples;
    std::vector<ClassTag> validation_labels;
    GroundTruth ground_truth;

    std::vector<LabeledSample> validation() const;
};

/// Deterministic given spec.seed. Background locations emit background
/// samples at every date; task locations emit background before a drawn
/// construction date and task from it onward. Throws std::out_of_range on a
/// degenerate spec.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

void save_ground_truth(const GroundTruth& truth, const std::string& path);
GroundTruth load_ground_truth(const std::string& path);

ConfusionCounts confusion_counts(const LinearHead& head,
                                 std::span<const Sample> samples,
                                 const GroundTruth& truth);

/// Labeled pool whose labels were assigned by curation (not ground truth).
struct LabeledPool {
    std::vector<Sample> samples;
    std::vector<ClassTag> labels;

    std::int64_t count(ClassTag tag) const;
    std::vector<LabeledSample> view() const;
};

struct BootstrapPrecision {
    std::optional<double> p_task;
    std::optional<double> p_background;
};

/// Moves the step_size most task-confident test samples into train as task
/// and the step_size least task-confident into train as background, scoring
/// the moves against ground truth. Throws std::out_of_range when
/// 2 * step_size exceeds the test size.
BootstrapPrecision bootstrap_step(LabeledPool& train, std::vector<Sample>& test,
                                  const LinearHead& head,
                                  std::int64_t step_size,
                                  const GroundTruth& truth);

struct BootstrapRound {
    int round = 0; // 0 = baseline before any move
    std::int64_t train_task = 0;
    std::int64_t train_background = 0;
    std::int64_t test_size = 0;
    double test_accuracy = 0.0;
    std::optional<double> p_task;
    std::optional<double> p_background;
};

/// Retrains each round, evaluates on the shrinking test set, then performs
/// one bootstrap step. Throws std::out_of_range naming the round that would
/// exhaust the test set.
std::vector<BootstrapRound> run_bootstrap_iterations(
    LabeledPool train, std::span<const LabeledSample> validation,
    std::vector<Sample> test, std::int64_t step_size, int rounds,
    const TrainConfig& cfg, const GroundTruth& truth);

struct BenchmarkRow {
    std::string name;
    int runs = 0;
    double supervised_mean = 0.0;
    double supervised_std = 0.0;
    double semi_mean = 0.0;
    double semi_std = 0.0;
    double delta = 0.0; // semi_mean - supervised_mean
};

/// Trains (a) a seeds-only baseline and (b) the full schedule pipeline on
/// the same synthetic data, `runs` times with varied training seeds, and
/// reports mean +/- sample standard deviation of validation accuracy.
BenchmarkRow compare_supervised_semisupervised(const SyntheticSpec& spec,
                                               const ssms::Schedule& schedule,
                                               int runs,
                                               const TrainConfig& base_cfg,
                                               const std::string& name = "synthetic");

void write_benchmark_csv(const std::vector<BenchmarkRow>& rows,
                         const std::string& path);

} // namespace archboot::evaluation

#endif
