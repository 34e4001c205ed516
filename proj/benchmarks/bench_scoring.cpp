// Sharded scoring throughput across worker counts.

#include "archboot/pipeline.hpp"

#include <benchmark/benchmark.h>

#include <cstdio>
#include <filesystem>
#include <random>

using namespace archboot;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    std::vector<Sample> samples;
    std::vector<std::string> ids;
    LinearHead head;

    explicit Fixture(std::size_t count, std::size_t dim = 64)
    {
        std::mt19937_64 rng(42);
        std::normal_distribution<double> normal(0.0, 1.0);
        samples.resize(count);
        ids.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "e%07zu", i);
            samples[i].id = buf;
            samples[i].location_id = samples[i].id;
            samples[i].capture_date = {2021, 1, 1};
            samples[i].embedding.resize(dim);
            for (auto& x : samples[i].embedding) {
                x = static_cast<float>(normal(rng));
            }
            ids[i] = samples[i].id;
        }
        head.w.resize(dim);
        for (auto& w : head.w) {
            w = normal(rng);
        }
    }
};

void BM_parallel_score(benchmark::State& state)
{
    static const Fixture fixture(200000);
    const auto workers = static_cast<std::size_t>(state.range(0));
    const auto plan = pipeline::plan_shards(fixture.ids, 16);
    const auto dir = fs::temp_directory_path() /
                     ("archboot_bench_" + std::to_string(workers));
    for (auto _ : state) {
        pipeline::parallel_score(fixture.samples, fixture.head, plan,
                                 dir.string(), workers);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(fixture.samples.size()));
    fs::remove_all(dir);
}

BENCHMARK(BM_parallel_score)->Arg(1)->Arg(2)->Arg(4)->Arg(8)
    ->Unit(benchmark::kMillisecond)->UseRealTime();

} // namespace

BENCHMARK_MAIN();
