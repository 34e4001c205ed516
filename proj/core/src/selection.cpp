#include "archboot/selection.hpp"

#include <algorithm>
#include <stdexcept>

namespace archboot::selection {

namespace {

// Total order used for selection. "Better" means: preferred confidence side
// first (higher for top, lower for bottom), then more recent capture date,
// then lower index. Both selection routes rank with this order, so their
// results coincide on every input.
struct Ranked {
    double conf;
    Date date;
    std::size_t index;
};

bool better(const Ranked& a, const Ranked& b, bool top)
{
    if (a.conf != b.conf) {
        return top ? a.conf > b.conf : a.conf < b.conf;
    }
    if (a.date != b.date) {
        return a.date > b.date;
    }
    return a.index < b.index;
}

} // namespace

double quickselect_kth(std::span<const double> values, std::size_t k,
                       std::mt19937_64& rng)
{
    if (values.empty()) {
        throw std::out_of_range("quickselect on empty input");
    }
    if (k < 1 || k > values.size()) {
        throw std::out_of_range("quickselect rank " + std::to_string(k) +
                                " outside [1, " +
                                std::to_string(values.size()) + "]");
    }
    std::vector<double> work(values.begin(), values.end());
    std::size_t lo = 0;
    std::size_t hi = work.size(); // half-open
    std::size_t target = k - 1;
    while (true) {
        if (hi - lo == 1) {
            return work[lo];
        }
        std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
        const double pivot = work[pick(rng)];

        // Three-way partition: [lo, lt) < pivot, [lt, gt) == pivot, [gt, hi) >.
        std::size_t lt = lo;
        std::size_t gt = hi;
        std::size_t i = lo;
        while (i < gt) {
            if (work[i] < pivot) {
                std::swap(work[i++], work[lt++]);
            } else if (work[i] > pivot) {
                std::swap(work[i], work[--gt]);
            } else {
                ++i;
            }
        }
        if (target < lt) {
            hi = lt;
        } else if (target < gt) {
            return pivot;
        } else {
            lo = gt;
        }
    }
}

double quickselect_kth(std::span<const double> values, std::size_t k)
{
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
    return quickselect_kth(values, k, rng);
}

namespace {

std::vector<std::size_t> bounded_heap_select(std::span<const double> conf,
                                             std::span<const Date> dates,
                                             std::size_t k, bool top)
{
    if (k > conf.size()) {
        throw std::out_of_range("K exceeds input size");
    }
    if (k == 0) {
        return {};
    }
    // Max-heap by "worst kept item"; the root is evicted when a better
    // candidate arrives, keeping the heap at the K best seen so far.
    const Date no_date{};
    auto ranked = [&](std::size_t i) {
        return Ranked{conf[i], dates.empty() ? no_date : dates[i], i};
    };
    auto worse = [top](const Ranked& a, const Ranked& b) {
        return better(a, b, top); // heap root = worst under `better`
    };
    std::vector<Ranked> heap;
    heap.reserve(k + 1);
    for (std::size_t i = 0; i < conf.size(); ++i) {
        Ranked item = ranked(i);
        if (heap.size() < k) {
            heap.push_back(item);
            std::push_heap(heap.begin(), heap.end(), worse);
        } else if (better(item, heap.front(), top)) {
            std::pop_heap(heap.begin(), heap.end(), worse);
            heap.back() = item;
            std::push_heap(heap.begin(), heap.end(), worse);
        }
    }
    std::vector<std::size_t> indices;
    indices.reserve(heap.size());
    for (const auto& item : heap) {
        indices.push_back(item.index);
    }
    std::sort(indices.begin(), indices.end());
    return indices;
}

} // namespace

std::vector<std::size_t> top_k_heap(std::span<const double> conf,
                                    std::size_t k, bool top)
{
    return bounded_heap_select(conf, {}, k, top);
}

std::vector<std::size_t> select_update_indices(const HistoryGroup& group,
                                               const UpdateSpec& spec,
                                               std::mt19937_64& rng)
{
    const std::size_t n = group.size();
    if (spec.k > n) {
        throw std::out_of_range("update K exceeds group size");
    }
    if (spec.k == 0) {
        return {};
    }
    // K-th largest is rank N-K+1 from the bottom.
    const std::size_t rank = spec.top ? n - spec.k + 1 : spec.k;
    const double threshold = quickselect_kth(group.conf, rank, rng);

    std::vector<std::size_t> selected;
    std::vector<std::size_t> at_threshold;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = group.conf[i];
        if ((spec.top && c > threshold) || (!spec.top && c < threshold)) {
            selected.push_back(i);
        } else if (c == threshold) {
            at_threshold.push_back(i);
        }
    }
    // Fill the remaining slots from the threshold-equal items, preferring
    // more recent captures, then lower index.
    std::sort(at_threshold.begin(), at_threshold.end(),
              [&group](std::size_t a, std::size_t b) {
                  if (group.samples[a].capture_date !=
                      group.samples[b].capture_date) {
                      return group.samples[a].capture_date >
                             group.samples[b].capture_date;
                  }
                  return a < b;
              });
    const std::size_t remaining = spec.k - selected.size();
    selected.insert(selected.end(), at_threshold.begin(),
                    at_threshold.begin() +
                        static_cast<std::ptrdiff_t>(
                            std::min(remaining, at_threshold.size())));
    std::sort(selected.begin(), selected.end());
    return selected;
}

std::vector<std::size_t> select_update_indices_heap(const HistoryGroup& group,
                                                    const UpdateSpec& spec)
{
    std::vector<Date> dates;
    dates.reserve(group.size());
    for (const auto& s : group.samples) {
        dates.push_back(s.capture_date);
    }
    return bounded_heap_select(group.conf, dates, spec.k, spec.top);
}

bool window_eligible(const Date& capture, const Date& date_ref,
                     int window_months)
{
    return capture <= date_ref &&
           months_between(date_ref, capture) < window_months;
}

std::size_t update(HistoryGroup& group, const UpdateSpec& spec,
                   std::mt19937_64& rng)
{
    group.check_aligned();
    const auto selected = select_update_indices(group, spec, rng);
    std::size_t incremented = 0;
    for (std::size_t i : selected) {
        if (window_eligible(group.samples[i].capture_date, spec.date_ref,
                            spec.window_months)) {
            ++group.alpha[i];
            ++incremented;
        }
    }
    return incremented;
}

std::size_t update_task(WeightedCorpus& corpus, std::size_t m_t, int d_t,
                        std::mt19937_64& rng)
{
    return update(corpus.task, {d_t, m_t, true, corpus.date_ref}, rng);
}

std::size_t update_background(WeightedCorpus& corpus, std::size_t m_b, int d_b,
                              std::mt19937_64& rng)
{
    return update(corpus.background, {d_b, m_b, false, corpus.date_ref}, rng);
}

std::size_t update_confounders(WeightedCorpus& corpus, std::size_t m_c, int d_b,
                               std::mt19937_64& rng)
{
    return update(corpus.background, {d_b, m_c, true, corpus.date_ref}, rng);
}

} // namespace archboot::selection
