// Compares the two top-K selection routes and the quickselect primitive
// against std::nth_element across corpus sizes.

#include "archboot/selection.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

using namespace archboot;

namespace {

std::vector<double> random_confidences(std::size_t n)
{
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> values(n);
    for (auto& v : values) {
        v = dist(rng);
    }
    return values;
}

HistoryGroup group_of(std::size_t n)
{
    HistoryGroup group;
    group.class_tag = ClassTag::background;
    std::mt19937_64 rng(6789);
    std::uniform_int_distribution<int> year_dist(2012, 2021);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        s.location_id = s.id;
        s.capture_date = {year_dist(rng), 1, 1};
        s.embedding = {0.0f};
        group.samples.push_back(std::move(s));
    }
    group.alpha.assign(n, 0);
    group.conf = random_confidences(n);
    return group;
}

void BM_quickselect(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto values = random_confidences(n);
    const std::size_t k = n / 2;
    for (auto _ : state) {
        benchmark::DoNotOptimize(selection::quickselect_kth(values, k));
    }
    state.SetComplexityN(state.range(0));
}

void BM_nth_element(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto values = random_confidences(n);
    const std::size_t k = n / 2;
    for (auto _ : state) {
        auto copy = values;
        std::nth_element(copy.begin(),
                         copy.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         copy.end());
        benchmark::DoNotOptimize(copy[k - 1]);
    }
    state.SetComplexityN(state.range(0));
}

void BM_threshold_route(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto group = group_of(n);
    selection::UpdateSpec spec;
    spec.k = n / 10;
    spec.top = true;
    spec.date_ref = {2021, 1, 1};
    spec.window_months = 1000;
    std::mt19937_64 rng(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            selection::select_update_indices(group, spec, rng));
    }
    state.SetComplexityN(state.range(0));
}

void BM_heap_route(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto group = group_of(n);
    selection::UpdateSpec spec;
    spec.k = n / 10;
    spec.top = true;
    spec.date_ref = {2021, 1, 1};
    spec.window_months = 1000;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            selection::select_update_indices_heap(group, spec));
    }
    state.SetComplexityN(state.range(0));
}

BENCHMARK(BM_quickselect)->Range(1 << 10, 1 << 20)->Complexity();
BENCHMARK(BM_nth_element)->Range(1 << 10, 1 << 20)->Complexity();
BENCHMARK(BM_threshold_route)->Range(1 << 10, 1 << 18)->Complexity();
BENCHMARK(BM_heap_route)->Range(1 << 10, 1 << 18)->Complexity();

} // namespace

BENCHMARK_MAIN();
