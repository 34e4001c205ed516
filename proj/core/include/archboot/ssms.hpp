#ifndef ARCHBOOT_SSMS_HPP
#define ARCHBOOT_SSMS_HPP

#include "archboot/corpus.hpp"
#include "archboot/linear_head.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace archboot::ssms {

struct ScheduleStep {
    int d_t = 0; // task window, months
    int d_b = 0; // background window, months
    std::size_t m_t = 0;
    std::size_t m_b = 0;
    std::size_t m_c = 0;
};

struct Schedule {
    std::vector<ScheduleStep> steps;

    /// The published six-step iteration schedule.
    static Schedule default_schedule();

    /// CSV with header d_t,d_b,m_t,m_b,m_c, one row per step.
    static Schedule load_csv(const std::string& path);
    void save_csv(const std::string& path) const;
};

struct IterationReport {
    int step_index = 0; // 1-based; 0 is the initial state
    std::size_t task_increments = 0;
    std::size_t background_increments = 0;
    std::size_t confounder_increments = 0;
    std::int64_t sum_alpha_task = 0;
    std::int64_t sum_alpha_background = 0;
    double validation_accuracy = 0.0;
};

/// Scores samples with the step's freshly trained model. The built-in
/// implementation calls predict_confidence; an external scorer can be
/// swapped in behind the same signature.
using ScoreFn = std::function<std::vector<double>(
    const LinearHead&, std::span<const Sample>)>;

ScoreFn builtin_scorer();

/// One semi-supervised model step: train on the effective multiset, refresh
/// every confidence in both groups, then the task / background / confounder
/// updates in that order.
IterationReport ssms_step(WeightedCorpus& corpus, const ScheduleStep& step,
                          const TrainConfig& cfg,
                          std::span<const LabeledSample> validation,
                          int step_index, const ScoreFn& scorer = builtin_scorer());

/// Post-schedule promotion: every background alpha += 1 so all historical
/// background images join the final training set.
void finalize(WeightedCorpus& corpus);

struct RunOptions {
    TrainConfig train;
    std::string state_dir;           // manifests + state checkpoints; empty = in-memory only
    std::string run_id = "run";
    ScoreFn scorer = builtin_scorer();
};

struct RunResult {
    std::vector<IterationReport> reports; // entry 0 is the initial state
    LinearHead final_model;
    double final_validation_accuracy = 0.0;
};

struct Manifest {
    std::string run_id;
    int step = 0; // last completed step
    std::vector<ScheduleStep> schedule;
    std::uint64_t seed = 0;
    std::int64_t sum_alpha_task = 0;
    std::int64_t sum_alpha_background = 0;
    std::string corpus_state_path;
    std::string model_path;
    std::string timestamp;

    void save(const std::string& path) const;
    static Manifest load(const std::string& path);
};

/// Runs every schedule step, then finalize and a final training pass. When a
/// state_dir is set, the corpus state and a manifest are persisted after
/// every step so an interrupted run can resume. Per-step seeds are derived
/// from cfg.seed and the step index, so a resumed run reproduces an
/// uninterrupted one bit for bit.
RunResult run_schedule(WeightedCorpus& corpus, const Schedule& schedule,
                       std::span<const LabeledSample> validation,
                       const RunOptions& options,
                       int resume_after_step = 0);

/// Deterministic per-step training seed.
std::uint64_t step_seed(std::uint64_t base_seed, int step_index);

} // namespace archboot::ssms

#endif
