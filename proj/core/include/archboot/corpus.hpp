#ifndef ARCHBOOT_CORPUS_HPP
#define ARCHBOOT_CORPUS_HPP

#include "archboot/date.hpp"
#include "archboot/tilegrid.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace archboot {

enum class ClassTag { task, background };

const char* to_string(ClassTag tag);
ClassTag class_tag_from_string(const std::string& s);

/// One image observation. Embeddings are resolved at load time; a corpus in
/// memory always carries its vectors.
struct Sample {
    std::string id;
    std::string location_id;
    tilegrid::TileKey tile;
    Date capture_date;
    std::vector<float> embedding;
    std::optional<ClassTag> seed_label;
};

/// An aligned triple of samples, integer loss weights and task-class
/// confidences for one class group (the task or background history set).
struct HistoryGroup {
    std::vector<Sample> samples;
    std::vector<std::int64_t> alpha;
    std::vector<double> conf; // task-class confidence, [0, 1]
    ClassTag class_tag = ClassTag::task;

    std::size_t size() const { return samples.size(); }

    /// |samples| == |alpha| == |conf|, alpha >= 0, conf in [0, 1].
    void check_aligned() const;
};

struct WeightedCorpus {
    HistoryGroup task;
    HistoryGroup background;
    Date date_ref;          // latest capture date across both groups
    std::int64_t seed_count = 0; // N seed locations per class

    std::size_t dim() const;
};

std::int64_t sum_alpha(const HistoryGroup& group);

struct TrainingEntry {
    const Sample* sample = nullptr;
    ClassTag label = ClassTag::task;
    std::int64_t weight = 1;
};

/// Every sample with alpha >= 1, exactly once, carrying weight = alpha.
/// Samples with alpha == 0 are omitted.
std::vector<TrainingEntry> effective_training_multiset(const WeightedCorpus& corpus);

/// Parse failure carrying the 1-based line number of the offending record.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
          line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct CorpusPaths {
    std::string labels_csv;
    std::string embeddings_bin;
    std::string state_jsonl; // optional on load; empty = fresh alphas
};

struct LoadedCorpus {
    WeightedCorpus corpus;
    std::vector<Sample> unlabeled; // scoring pool, not part of the groups
};

/// Loads labels + embeddings (+ optional alpha/conf state). Group entries are
/// ordered seeds-first; the seed of a location is its latest capture. Fresh
/// state gives seeds alpha 1 and everything else alpha 0.
LoadedCorpus load_corpus(const CorpusPaths& paths);

void save_corpus(const LoadedCorpus& loaded, const CorpusPaths& paths);

/// Writes just the alpha/conf state (JSON Lines, one record per sample).
void save_state(const WeightedCorpus& corpus, const std::string& path);
void load_state(WeightedCorpus& corpus, const std::string& path);

// Embeddings container format: magic "AEMB", u32-le dimension, then records
// of (u16-le id length, id bytes, dim f32-le values).
using EmbeddingTable = std::unordered_map<std::string, std::vector<float>>;

void write_embeddings(const std::string& path, std::uint32_t dim,
                      const std::vector<std::pair<std::string, std::vector<float>>>& records);
std::pair<std::uint32_t, EmbeddingTable> read_embeddings(const std::string& path);

} // namespace archboot

#endif
