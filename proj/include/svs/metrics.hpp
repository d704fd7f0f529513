#pragma once

#include <cstdint>
#include <vector>

#include "svs/errors.hpp"

namespace svs {

/// A clustering of n items into k clusters; labels are in [0, k).
struct ClusterAssignment {
  std::vector<int> labels;
  int k = 0;
};

enum class MetricId { FM, NMI, PUR };

/// Pair counts over all unordered item pairs, plus the per-item counts of
/// pairs containing each item. Identities: tp+fp+fn+tn == C(n,2) and
/// sum_i per_item_x[i] == 2*x for x in {tp, fp, fn}.
struct PairConfusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  std::vector<std::uint64_t> per_item_tp;
  std::vector<std::uint64_t> per_item_fp;
  std::vector<std::uint64_t> per_item_fn;

  std::size_t size() const { return per_item_tp.size(); }
};

/// Counts pair agreement between a predicted clustering and ground-truth
/// labels in O(n + k_pred * k_truth) via the contingency table.
PairConfusion pair_confusion(const ClusterAssignment& pred,
                             const std::vector<int>& truth);

/// Reuse-friendly variant for hot loops.
void pair_confusion(const ClusterAssignment& pred,
                    const std::vector<int>& truth, PairConfusion& out);

/// Global Fowlkes-Mallows index TP/sqrt((TP+FP)(TP+FN)); 0 when either
/// factor is 0.
double fm_global(const PairConfusion& conf);

/// Per-item Fowlkes-Mallows score of one item, same degenerate rule.
double fm_individual(const PairConfusion& conf, std::size_t item);

/// Normalized mutual information, natural log, geometric-mean
/// normalization. 1.0 when both entropies are 0, 0.0 when exactly one is.
double nmi(const ClusterAssignment& pred, const std::vector<int>& truth);

/// Fraction of items whose cluster's majority truth class matches them.
double purity(const ClusterAssignment& pred, const std::vector<int>& truth);

}  // namespace svs
