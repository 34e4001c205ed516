#include "archboot/pipeline.hpp"

#include "archboot/temporal.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <queue>
#include <thread>
#include <unordered_map>

namespace archboot::pipeline {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_record(const std::string& id, double conf)
{
    // json::dump gives shortest round-trip doubles, keeping merged output
    // byte-stable across worker counts.
    json j = {{"id", id}, {"conf", conf}};
    return j.dump();
}

} // namespace

std::size_t ShardPlan::total_ids() const
{
    std::size_t total = 0;
    for (const auto& shard : shards) {
        total += shard.size();
    }
    return total;
}

ShardPlan plan_shards(std::vector<std::string> ids, std::size_t n)
{
    if (n == 0) {
        throw std::out_of_range("shard count must be at least 1");
    }
    std::sort(ids.begin(), ids.end());
    ShardPlan plan;
    plan.shards.resize(n);
    const std::size_t base = ids.size() / n;
    const std::size_t extra = ids.size() % n;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t size = base + (i < extra ? 1 : 0);
        plan.shards[i].assign(ids.begin() + static_cast<std::ptrdiff_t>(cursor),
                              ids.begin() +
                                  static_cast<std::ptrdiff_t>(cursor + size));
        cursor += size;
    }
    return plan;
}

std::vector<ScoreRecord> score_samples(std::span<const Sample> snapshot,
                                       const LinearHead& model)
{
    std::vector<ScoreRecord> records;
    records.reserve(snapshot.size());
    for (const auto& s : snapshot) {
        records.push_back({s.id, predict_confidence(model, s.embedding)});
    }
    return records;
}

ScoreOutput parallel_score(std::span<const Sample> snapshot,
                           const LinearHead& model, const ShardPlan& plan,
                           const std::string& out_dir, std::size_t workers)
{
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    fs::create_directories(out_dir);

    std::unordered_map<std::string, const Sample*> by_id;
    by_id.reserve(snapshot.size());
    for (const auto& s : snapshot) {
        by_id.emplace(s.id, &s);
    }

    ScoreOutput output;
    output.shard_paths.resize(plan.shard_count());
    for (std::size_t i = 0; i < plan.shard_count(); ++i) {
        output.shard_paths[i] =
            (fs::path(out_dir) / ("shard_" + std::to_string(i) + ".jsonl"))
                .string();
    }

    auto score_shard = [&](std::size_t shard_index) {
        const auto& ids = plan.shards[shard_index];
        std::string buffer;
        for (const auto& id : ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw std::runtime_error("planned id not in snapshot: " + id);
            }
            buffer += format_record(
                id, predict_confidence(model, it->second->embedding));
            buffer += '\n';
        }
        std::ofstream out(output.shard_paths[shard_index], std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write shard file " +
                                     output.shard_paths[shard_index]);
        }
        out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        if (!out) {
            throw std::runtime_error("write failed on " +
                                     output.shard_paths[shard_index]);
        }
    };

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        while (true) {
            const std::size_t shard_index = next.fetch_add(1);
            if (shard_index >= plan.shard_count()) {
                return;
            }
            try {
                score_shard(shard_index);
            } catch (...) {
                // One retry, then give up and surface the failure.
                try {
                    score_shard(shard_index);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                    return;
                }
            }
        }
    };

    std::vector<std::thread> pool;
    const std::size_t thread_count = std::min(workers, plan.shard_count());
    pool.reserve(thread_count);
    for (std::size_t i = 0; i < thread_count; ++i) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }

    // Shards hold contiguous sorted id ranges; the k-way merge by id keeps
    // the merged file independent of how the work was scheduled.
    output.merged_path = (fs::path(out_dir) / "scores.jsonl").string();
    struct Cursor {
        std::ifstream stream;
        std::string line;
        std::string id;
        bool advance()
        {
            if (!std::getline(stream, line) || line.empty()) {
                return false;
            }
            id = json::parse(line).at("id").get<std::string>();
            return true;
        }
    };
    std::vector<std::unique_ptr<Cursor>> cursors;
    for (const auto& path : output.shard_paths) {
        auto c = std::make_unique<Cursor>();
        c->stream.open(path);
        if (!c->stream) {
            throw std::runtime_error("cannot reopen shard file " + path);
        }
        if (c->advance()) {
            cursors.push_back(std::move(c));
        }
    }
    auto cmp = [](const Cursor* a, const Cursor* b) { return a->id > b->id; };
    std::priority_queue<Cursor*, std::vector<Cursor*>, decltype(cmp)> heap(cmp);
    for (auto& c : cursors) {
        heap.push(c.get());
    }
    std::ofstream merged(output.merged_path, std::ios::binary);
    if (!merged) {
        throw std::runtime_error("cannot write merged file " +
                                 output.merged_path);
    }
    while (!heap.empty()) {
        Cursor* c = heap.top();
        heap.pop();
        merged << c->line << '\n';
        if (c->advance()) {
            heap.push(c);
        }
    }
    return output;
}

std::vector<ScoreRecord> read_score_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open score file " + path);
    }
    std::vector<ScoreRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            json j = json::parse(line);
            records.push_back({j.at("id").get<std::string>(),
                               j.at("conf").get<double>()});
        } catch (const json::exception& e) {
            throw ParseError(path, lineno, e.what());
        }
    }
    return records;
}

std::vector<std::string> select_top_k_global(
    const std::vector<std::string>& score_files, std::size_t k)
{
    struct Entry {
        double conf;
        std::string id;
    };
    // Heap rooted at the worst kept entry: lowest confidence, ties by
    // highest id, mirroring the selection module's preference for low ids.
    auto better_than = [](const Entry& a, const Entry& b) {
        if (a.conf != b.conf) {
            return a.conf > b.conf;
        }
        return a.id < b.id;
    };
    std::vector<Entry> heap;
    heap.reserve(k + 1);
    std::size_t total = 0;
    for (const auto& path : score_files) {
        for (auto& record : read_score_file(path)) {
            ++total;
            if (k == 0) {
                continue;
            }
            Entry entry{record.conf, std::move(record.id)};
            if (heap.size() < k) {
                heap.push_back(std::move(entry));
                std::push_heap(heap.begin(), heap.end(), better_than);
            } else if (better_than(entry, heap.front())) {
                // entry outranks the current worst
                std::pop_heap(heap.begin(), heap.end(), better_than);
                heap.back() = std::move(entry);
                std::push_heap(heap.begin(), heap.end(), better_than);
            }
        }
    }
    if (k > total) {
        throw std::out_of_range("top-K " + std::to_string(k) +
                                " exceeds record count " +
                                std::to_string(total));
    }
    std::sort(heap.begin(), heap.end(), [](const Entry& a, const Entry& b) {
        if (a.conf != b.conf) {
            return a.conf > b.conf;
        }
        return a.id < b.id;
    });
    std::vector<std::string> ids;
    ids.reserve(heap.size());
    for (auto& entry : heap) {
        ids.push_back(std::move(entry.id));
    }
    return ids;
}

std::size_t export_gis(const WeightedCorpus& corpus, double threshold,
                       const std::string& path, const std::string& class_name)
{
    struct Capture {
        Date date;
        double conf;
        tilegrid::TileKey tile;
    };
    std::map<std::string, std::vector<Capture>> by_location;
    for (const auto* group : {&corpus.task, &corpus.background}) {
        for (std::size_t i = 0; i < group->size(); ++i) {
            const auto& s = group->samples[i];
            by_location[s.location_id].push_back(
                {s.capture_date, group->conf[i], s.tile});
        }
    }

    json features = json::array();
    std::size_t count = 0;
    for (auto& [location_id, captures] : by_location) {
        std::sort(captures.begin(), captures.end(),
                  [](const Capture& a, const Capture& b) {
                      return a.date < b.date;
                  });
        temporal::LocationSeries series;
        series.location_id = location_id;
        for (const auto& c : captures) {
            series.dates.push_back(c.date);
            series.conf.push_back(c.conf);
        }
        const auto year = temporal::first_detection_year(series, threshold);
        if (!year) {
            continue;
        }
        const auto fit = temporal::fit_step(series);
        const auto& detection = captures[fit.t0];
        const auto centroid = tilegrid::tile_center(detection.tile);
        json feature = {
            {"type", "Feature"},
            {"geometry",
             {{"type", "Point"},
              {"coordinates", {centroid.lon, centroid.lat}}}},
            {"properties",
             {{"location_id", location_id},
              {"year", *year},
              {"class", class_name},
              {"confidence", detection.conf}}}};
        features.push_back(std::move(feature));
        ++count;
    }

    json collection = {{"type", "FeatureCollection"},
                       {"features", std::move(features)}};
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write GIS export to " + path);
    }
    out << collection.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("write failed on " + path);
    }
    return count;
}

StateLock::StateLock(const std::string& state_dir)
{
    fs::create_directories(state_dir);
    lock_path_ = (fs::path(state_dir) / ".lock").string();
    std::FILE* f = std::fopen(lock_path_.c_str(), "wx");
    if (f == nullptr) {
        throw std::runtime_error("state directory " + state_dir +
                                 " is locked by another run");
    }
    std::fclose(f);
}

StateLock::~StateLock()
{
    std::remove(lock_path_.c_str());
}

} // namespace archboot::pipeline
