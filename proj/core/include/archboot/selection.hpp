#ifndef ARCHBOOT_SELECTION_HPP
#define ARCHBOOT_SELECTION_HPP

#include "archboot/corpus.hpp"
#include "archboot/date.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace archboot::selection {

/// Parameters of one alpha-update pass over a history group.
struct UpdateSpec {
    int window_months = 0;   // D: eligibility window before date_ref
    std::size_t k = 0;       // number of alpha increments targeted
    bool top = true;         // top-K (true) vs bottom-K (false) by confidence
    Date date_ref;
};

/// k-th smallest element (1-based) via randomized quickselect, expected
/// linear time. Throws std::out_of_range for empty input or k outside
/// [1, |values|].
double quickselect_kth(std::span<const double> values, std::size_t k,
                       std::mt19937_64& rng);

/// Convenience overload with a fixed-seed internal generator.
double quickselect_kth(std::span<const double> values, std::size_t k);

/// Indices of the K largest (top) or smallest (bottom) confidences, tracked
/// with a bounded heap of size K. Ties at the boundary prefer the lower
/// index. K == 0 yields an empty set; throws std::out_of_range if K exceeds
/// the input size.
std::vector<std::size_t> top_k_heap(std::span<const double> conf,
                                    std::size_t k, bool top);

/// The K group indices an update pass targets, before window filtering.
/// The threshold conf_K is the K-th largest (top) or K-th smallest (bottom)
/// confidence over the whole group. Strictly-better items are always in;
/// threshold-equal items are admitted by (more recent capture date, lower
/// index) until exactly K are selected.
std::vector<std::size_t> select_update_indices(const HistoryGroup& group,
                                               const UpdateSpec& spec,
                                               std::mt19937_64& rng);

/// Same result computed with the bounded-heap route instead of the
/// quickselect threshold; kept as an independent path for cross-checking.
std::vector<std::size_t> select_update_indices_heap(const HistoryGroup& group,
                                                    const UpdateSpec& spec);

/// Whether the sample may receive an increment under the window rule:
/// 0 <= months_between(date_ref, capture) < D.
bool window_eligible(const Date& capture, const Date& date_ref,
                     int window_months);

/// One update pass: select up to spec.k indices, increment alpha for the
/// window-eligible ones. Returns the number of increments made, which can be
/// below K when the window excludes candidates. Throws std::out_of_range if
/// spec.k exceeds the group size.
std::size_t update(HistoryGroup& group, const UpdateSpec& spec,
                   std::mt19937_64& rng);

/// Increment the M_T highest task-confidence items in the task group.
std::size_t update_task(WeightedCorpus& corpus, std::size_t m_t, int d_t,
                        std::mt19937_64& rng);

/// Increment the M_B lowest task-confidence items in the background group.
std::size_t update_background(WeightedCorpus& corpus, std::size_t m_b, int d_b,
                              std::mt19937_64& rng);

/// Increment the M_C highest task-confidence items in the background group
/// (confounders: high confidence, wrong class).
std::size_t update_confounders(WeightedCorpus& corpus, std::size_t m_c, int d_b,
                               std::mt19937_64& rng);

} // namespace archboot::selection

#endif
