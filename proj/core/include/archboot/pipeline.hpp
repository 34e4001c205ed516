#ifndef ARCHBOOT_PIPELINE_HPP
#define ARCHBOOT_PIPELINE_HPP

#include "archboot/corpus.hpp"
#include "archboot/linear_head.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace archboot::pipeline {

/// Deterministic balanced partition of sample ids over shards. Every id is
/// in exactly one shard and shard sizes differ by at most one.
struct ShardPlan {
    std::vector<std::vector<std::string>> shards;

    std::size_t shard_count() const { return shards.size(); }
    std::size_t total_ids() const;
};

/// Partitions ids (sorted) into n contiguous shards. Throws
/// std::out_of_range when n == 0.
ShardPlan plan_shards(std::vector<std::string> ids, std::size_t n);

struct ScoreRecord {
    std::string id;
    double conf = 0.0;
};

/// Scores every planned shard with a fixed pool of worker threads and writes
/// one JSON Lines fragment per shard (`shard_<i>.jsonl` under out_dir),
/// then merges them into `scores.jsonl` ordered by id. A failed shard is
/// retried once; a second failure aborts, preserving completed fragments.
/// The merged output is byte-identical regardless of worker count.
struct ScoreOutput {
    std::vector<std::string> shard_paths;
    std::string merged_path;
};

ScoreOutput parallel_score(std::span<const Sample> snapshot,
                           const LinearHead& model, const ShardPlan& plan,
                           const std::string& out_dir, std::size_t workers);

/// In-memory variant used by tests and the top-K path.
std::vector<ScoreRecord> score_samples(std::span<const Sample> snapshot,
                                       const LinearHead& model);

std::vector<ScoreRecord> read_score_file(const std::string& path);

/// Globally highest-K confidence ids across shard score files, streamed
/// through a bounded heap. Ordering: higher confidence first, ties by
/// lower id. Throws std::out_of_range when k exceeds the record count.
std::vector<std::string> select_top_k_global(
    const std::vector<std::string>& score_files, std::size_t k);

/// One detected location for the GIS layer.
struct DetectionFeature {
    tilegrid::TileKey tile;
    tilegrid::GeoPoint centroid;
    int first_detection_year = 0;
    std::string class_name;
    double confidence = 0.0; // confidence at the detection capture
};

/// Builds per-location confidence series from the scored corpus, smooths
/// them to step functions and writes a GeoJSON FeatureCollection of Point
/// features ({year, class, confidence}) ordered by location id. Returns the
/// number of features written.
std::size_t export_gis(const WeightedCorpus& corpus, double threshold,
                       const std::string& path,
                       const std::string& class_name = "task");

/// Exclusive lock on a state directory; throws std::runtime_error when the
/// directory is already locked.
class StateLock {
public:
    explicit StateLock(const std::string& state_dir);
    ~StateLock();
    StateLock(const StateLock&) = delete;
    StateLock& operator=(const StateLock&) = delete;

private:
    std::string lock_path_;
};

} // namespace archboot::pipeline

#endif
