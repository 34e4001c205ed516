#ifndef ARCHBOOT_LINEAR_HEAD_HPP
#define ARCHBOOT_LINEAR_HEAD_HPP

#include "archboot/corpus.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace archboot {

/// Binary logistic classifier over a frozen embedding space. The single
/// output is the task-class probability; the background probability is its
/// complement.
struct LinearHead {
    std::vector<double> w;
    double b = 0.0;

    std::size_t dim() const { return w.size(); }

    void save(const std::string& path) const;
    static LinearHead load(const std::string& path);
};

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 20;
    int batch_size = 16;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;        // weighted loss over the corpus
    double validation_accuracy = 0.0;
};

struct TrainResult {
    LinearHead head; // checkpoint with the highest validation accuracy
    std::vector<EpochMetrics> metrics;
    int best_epoch = 0;
};

struct LabeledSample {
    const Sample* sample = nullptr;
    ClassTag label = ClassTag::task;
};

/// P_T = logistic(w . e + b). Throws std::invalid_argument on a dimension
/// mismatch.
double predict_confidence(const LinearHead& head, std::span<const float> e);

/// Eq-style weighted objective: sum over both groups of alpha_i times the
/// per-sample binary cross-entropy against the group's class.
double weighted_loss(const LinearHead& head, const WeightedCorpus& corpus);

double sample_loss(const LinearHead& head, std::span<const float> e, ClassTag label);

/// Analytic gradient of the alpha-weighted single-sample loss, appended as
/// (dL/dw..., dL/db).
std::vector<double> sample_gradient(const LinearHead& head,
                                    std::span<const float> e, ClassTag label,
                                    std::int64_t alpha);

/// Mini-batch SGD over the alpha-expanded sample slots: a sample with
/// alpha = k occupies k shuffle slots, which makes the trajectory identical
/// to physically duplicating it k times under the same seed. Deterministic
/// given (corpus, cfg). Returns the epoch checkpoint with the highest
/// validation accuracy (earliest epoch on ties; epoch 0 = initialization).
TrainResult train(const WeightedCorpus& corpus, const TrainConfig& cfg,
                  std::span<const LabeledSample> validation);

double validation_accuracy(const LinearHead& head,
                           std::span<const LabeledSample> validation);

/// Max relative error between the analytic gradient and central finite
/// differences (step 1e-5) on one sample.
double gradient_check(const LinearHead& head, std::span<const float> e,
                      ClassTag label, std::int64_t alpha = 1);

/// External scorer exchange: writes ids + embeddings + a request manifest
/// into the scorer directory, runs <dir>/scorer <manifest>, and reads back
/// JSON Lines records {"id":..., "conf":...}. Every requested id must be
/// answered exactly once with conf in [0,1].
struct ExternalScorerSpec {
    std::string directory; // contains the `scorer` executable
};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ScorerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<double> score_with_external(std::span<const Sample> samples,
                                        const ExternalScorerSpec& spec);

} // namespace archboot

#endif
