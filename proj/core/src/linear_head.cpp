#include "archboot/linear_head.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace archboot {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

double dot(std::span<const double> w, std::span<const float> e)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i] * static_cast<double>(e[i]);
    }
    return acc;
}

double logistic(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double ez = std::exp(z);
    return ez / (1.0 + ez);
}

// log(1 + exp(z)) without overflow.
double softplus(double z)
{
    if (z > 0.0) {
        return z + std::log1p(std::exp(-z));
    }
    return std::log1p(std::exp(z));
}

void check_dim(const LinearHead& head, std::span<const float> e)
{
    if (head.w.size() != e.size()) {
        throw std::invalid_argument(
            "embedding dimension " + std::to_string(e.size()) +
            " does not match head dimension " + std::to_string(head.w.size()));
    }
}

double label_value(ClassTag tag)
{
    return tag == ClassTag::task ? 1.0 : 0.0;
}

} // namespace

double predict_confidence(const LinearHead& head, std::span<const float> e)
{
    check_dim(head, e);
    return logistic(dot(head.w, e) + head.b);
}

double sample_loss(const LinearHead& head, std::span<const float> e,
                   ClassTag label)
{
    check_dim(head, e);
    const double z = dot(head.w, e) + head.b;
    return softplus(z) - label_value(label) * z;
}

double weighted_loss(const LinearHead& head, const WeightedCorpus& corpus)
{
    double total = 0.0;
    auto add = [&](const HistoryGroup& group) {
        for (std::size_t i = 0; i < group.size(); ++i) {
            if (group.alpha[i] == 0) {
                continue; // no contribution to training
            }
            total += static_cast<double>(group.alpha[i]) *
                     sample_loss(head, group.samples[i].embedding,
                                 group.class_tag);
        }
    };
    add(corpus.task);
    add(corpus.background);
    return total;
}

std::vector<double> sample_gradient(const LinearHead& head,
                                    std::span<const float> e, ClassTag label,
                                    std::int64_t alpha)
{
    check_dim(head, e);
    const double p = predict_confidence(head, e);
    const double scale =
        static_cast<double>(alpha) * (p - label_value(label));
    std::vector<double> grad(head.dim() + 1);
    for (std::size_t i = 0; i < head.dim(); ++i) {
        grad[i] = scale * static_cast<double>(e[i]);
    }
    grad[head.dim()] = scale;
    return grad;
}

double validation_accuracy(const LinearHead& head,
                           std::span<const LabeledSample> validation)
{
    if (validation.empty()) {
        return 0.0;
    }
    std::size_t correct = 0;
    for (const auto& ls : validation) {
        const double p = predict_confidence(head, ls.sample->embedding);
        const ClassTag predicted =
            p >= 0.5 ? ClassTag::task : ClassTag::background;
        correct += predicted == ls.label;
    }
    return static_cast<double>(correct) /
           static_cast<double>(validation.size());
}

TrainResult train(const WeightedCorpus& corpus, const TrainConfig& cfg,
                  std::span<const LabeledSample> validation)
{
    if (cfg.learning_rate <= 0.0 || cfg.epochs < 0 || cfg.batch_size <= 0) {
        throw std::invalid_argument("invalid training configuration");
    }
    const auto entries = effective_training_multiset(corpus);
    bool has_task = false;
    bool has_background = false;
    for (const auto& entry : entries) {
        (entry.label == ClassTag::task ? has_task : has_background) = true;
    }
    if (!has_task || !has_background) {
        throw std::invalid_argument(
            "training corpus needs at least one active sample per class");
    }

    // A sample with alpha = k occupies k slots, so shuffling and batching see
    // exactly what physical duplication would produce.
    std::vector<std::size_t> slots;
    for (std::size_t idx = 0; idx < entries.size(); ++idx) {
        for (std::int64_t c = 0; c < entries[idx].weight; ++c) {
            slots.push_back(idx);
        }
    }

    const std::size_t dim = corpus.dim();
    LinearHead head;
    head.w.assign(dim, 0.0);
    head.b = 0.0;

    TrainResult result;
    result.head = head;
    result.best_epoch = 0;
    double best_acc = validation_accuracy(head, validation);
    result.metrics.push_back({0, weighted_loss(head, corpus), best_acc});

    std::mt19937_64 rng(cfg.seed);
    std::vector<double> grad_w(dim);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) {
            std::shuffle(slots.begin(), slots.end(), rng);
        }
        for (std::size_t start = 0; start < slots.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(slots.size(),
                         start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            double grad_b = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const auto& entry = entries[slots[s]];
                const auto& e = entry.sample->embedding;
                const double p = predict_confidence(head, e);
                const double g = p - label_value(entry.label);
                for (std::size_t i = 0; i < dim; ++i) {
                    grad_w[i] += g * static_cast<double>(e[i]);
                }
                grad_b += g;
            }
            const double step =
                cfg.learning_rate / static_cast<double>(end - start);
            for (std::size_t i = 0; i < dim; ++i) {
                head.w[i] -= step * grad_w[i];
            }
            head.b -= step * grad_b;
        }
        const double loss = weighted_loss(head, corpus);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("training diverged at epoch " +
                                     std::to_string(epoch));
        }
        const double acc = validation_accuracy(head, validation);
        result.metrics.push_back({epoch, loss, acc});
        const bool improves =
            validation.empty() ? true : acc > best_acc;
        if (improves) {
            best_acc = acc;
            result.head = head;
            result.best_epoch = epoch;
        }
    }
    return result;
}

double gradient_check(const LinearHead& head, std::span<const float> e,
                      ClassTag label, std::int64_t alpha)
{
    const auto analytic = sample_gradient(head, e, label, alpha);
    const double step = 1e-5;
    const double a = static_cast<double>(alpha);
    double max_rel = 0.0;
    auto rel = [](double x, double y) {
        const double denom = std::max({std::fabs(x), std::fabs(y), 1e-8});
        return std::fabs(x - y) / denom;
    };
    LinearHead probe = head;
    for (std::size_t i = 0; i <= head.dim(); ++i) {
        double& param = i < head.dim() ? probe.w[i] : probe.b;
        const double saved = param;
        param = saved + step;
        const double up = a * sample_loss(probe, e, label);
        param = saved - step;
        const double down = a * sample_loss(probe, e, label);
        param = saved;
        const double numeric = (up - down) / (2.0 * step);
        max_rel = std::max(max_rel, rel(analytic[i], numeric));
    }
    return max_rel;
}

void LinearHead::save(const std::string& path) const
{
    json j = {{"dim", w.size()}, {"w", w}, {"b", b}};
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write model file " + path);
    }
    out << j.dump() << '\n';
}

LinearHead LinearHead::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open model file " + path);
    }
    json j = json::parse(in);
    LinearHead head;
    head.w = j.at("w").get<std::vector<double>>();
    head.b = j.at("b").get<double>();
    if (head.w.size() != j.at("dim").get<std::size_t>()) {
        throw std::runtime_error(path + ": dim field disagrees with weights");
    }
    return head;
}

std::vector<double> score_with_external(std::span<const Sample> samples,
                                        const ExternalScorerSpec& spec)
{
    const fs::path dir(spec.directory);
    const fs::path scorer = dir / "scorer";
    if (!fs::exists(scorer)) {
        throw ScorerError("no scorer executable in " + spec.directory);
    }
    const fs::path ids_path = dir / "ids.txt";
    const fs::path emb_path = dir / "embeddings.aemb";
    const fs::path out_path = dir / "response.jsonl";
    const fs::path manifest_path = dir / "request.json";
    const fs::path log_path = dir / "scorer.log";

    {
        std::ofstream ids(ids_path);
        std::vector<std::pair<std::string, std::vector<float>>> records;
        for (const auto& s : samples) {
            ids << s.id << '\n';
            records.emplace_back(s.id, s.embedding);
        }
        const std::uint32_t dim =
            samples.empty() ? 0
                            : static_cast<std::uint32_t>(
                                  samples.front().embedding.size());
        write_embeddings(emb_path.string(), dim, records);
        json manifest = {{"embeddings", emb_path.string()},
                         {"ids", ids_path.string()},
                         {"output", out_path.string()}};
        std::ofstream mf(manifest_path);
        mf << manifest.dump() << '\n';
    }

    std::error_code ec;
    fs::remove(out_path, ec);
    const std::string command = scorer.string() + " " + manifest_path.string() +
                                " > " + log_path.string() + " 2>&1";
    const int status = std::system(command.c_str());
    if (status != 0) {
        std::ifstream log(log_path);
        std::stringstream diag;
        diag << log.rdbuf();
        throw ScorerError("scorer exited with status " +
                          std::to_string(status) + ": " + diag.str());
    }

    std::ifstream response(out_path);
    if (!response) {
        throw ProtocolError("scorer produced no response file " +
                            out_path.string());
    }
    std::unordered_map<std::string, double> answered;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(response, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::string id;
        double conf = 0.0;
        try {
            json record = json::parse(line);
            id = record.at("id").get<std::string>();
            conf = record.at("conf").get<double>();
        } catch (const json::exception& e) {
            throw ProtocolError("malformed response at line " +
                                std::to_string(lineno) + ": " + e.what());
        }
        if (!(conf >= 0.0 && conf <= 1.0)) {
            throw ProtocolError("confidence outside [0,1] for id " + id);
        }
        if (!answered.emplace(id, conf).second) {
            throw ProtocolError("duplicate response for id " + id);
        }
    }
    if (answered.size() != samples.size()) {
        throw ProtocolError("scorer answered " +
                            std::to_string(answered.size()) + " of " +
                            std::to_string(samples.size()) + " ids");
    }
    std::vector<double> confs;
    confs.reserve(samples.size());
    for (const auto& s : samples) {
        auto it = answered.find(s.id);
        if (it == answered.end()) {
            throw ProtocolError("missing response for id " + s.id);
        }
        confs.push_back(it->second);
    }
    return confs;
}

} // namespace archboot
