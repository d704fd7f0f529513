#include "svs/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace svs {

namespace {

// Maps arbitrary int labels to a compact [0, k) range. Returns k.
int compactify(const std::vector<int>& labels, std::vector<int>& compact,
               std::vector<int>& lut) {
  int lo = labels[0], hi = labels[0];
  for (int v : labels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  lut.assign(static_cast<std::size_t>(hi - lo) + 1, -1);
  compact.resize(labels.size());
  int k = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int& slot = lut[static_cast<std::size_t>(labels[i] - lo)];
    if (slot < 0) slot = k++;
    compact[i] = slot;
  }
  return k;
}

std::uint64_t comb2(std::uint64_t x) { return x * (x - 1) / 2; }

struct Contingency {
  int kp = 0;  // predicted clusters
  int kt = 0;  // truth classes
  std::vector<std::uint64_t> cells;  // kp * kt
  std::vector<std::uint64_t> pred_sizes;
  std::vector<std::uint64_t> truth_sizes;
  std::vector<int> pred_compact;
  std::vector<int> truth_compact;
  std::vector<int> scratch;

  void build(const ClusterAssignment& pred, const std::vector<int>& truth) {
    kp = compactify(pred.labels, pred_compact, scratch);
    kt = compactify(truth, truth_compact, scratch);
    cells.assign(static_cast<std::size_t>(kp) * kt, 0);
    pred_sizes.assign(kp, 0);
    truth_sizes.assign(kt, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const int p = pred_compact[i];
      const int t = truth_compact[i];
      ++cells[static_cast<std::size_t>(p) * kt + t];
      ++pred_sizes[p];
      ++truth_sizes[t];
    }
  }
};

}  // namespace

void pair_confusion(const ClusterAssignment& pred,
                    const std::vector<int>& truth, PairConfusion& out) {
  const std::size_t n = truth.size();
  require(pred.labels.size() == n, ErrorCode::LengthMismatch,
          "pred/truth length mismatch");
  require(n >= 2, ErrorCode::InvalidArgument,
          "pair counts need at least 2 items");

  Contingency ct;
  ct.build(pred, truth);

  std::uint64_t tp = 0;
  for (std::uint64_t c : ct.cells) tp += comb2(c);
  std::uint64_t same_pred = 0;
  for (std::uint64_t b : ct.pred_sizes) same_pred += comb2(b);
  std::uint64_t same_truth = 0;
  for (std::uint64_t a : ct.truth_sizes) same_truth += comb2(a);

  out.tp = tp;
  out.fp = same_pred - tp;
  out.fn = same_truth - tp;
  out.tn = comb2(n) - same_pred - same_truth + tp;

  out.per_item_tp.resize(n);
  out.per_item_fp.resize(n);
  out.per_item_fn.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int p = ct.pred_compact[i];
    const int t = ct.truth_compact[i];
    const std::uint64_t joint =
        ct.cells[static_cast<std::size_t>(p) * ct.kt + t];
    out.per_item_tp[i] = joint - 1;
    out.per_item_fp[i] = ct.pred_sizes[p] - joint;
    out.per_item_fn[i] = ct.truth_sizes[t] - joint;
  }
}

PairConfusion pair_confusion(const ClusterAssignment& pred,
                             const std::vector<int>& truth) {
  PairConfusion out;
  pair_confusion(pred, truth, out);
  return out;
}

double fm_global(const PairConfusion& conf) {
  const double a = static_cast<double>(conf.tp + conf.fp);
  const double b = static_cast<double>(conf.tp + conf.fn);
  if (a == 0.0 || b == 0.0) return 0.0;
  return static_cast<double>(conf.tp) / std::sqrt(a * b);
}

double fm_individual(const PairConfusion& conf, std::size_t item) {
  require(item < conf.size(), ErrorCode::InvalidArgument,
          "item index out of range");
  const double a =
      static_cast<double>(conf.per_item_tp[item] + conf.per_item_fp[item]);
  const double b =
      static_cast<double>(conf.per_item_tp[item] + conf.per_item_fn[item]);
  if (a == 0.0 || b == 0.0) return 0.0;
  return static_cast<double>(conf.per_item_tp[item]) / std::sqrt(a * b);
}

double nmi(const ClusterAssignment& pred, const std::vector<int>& truth) {
  const std::size_t n = truth.size();
  require(pred.labels.size() == n, ErrorCode::LengthMismatch,
          "pred/truth length mismatch");
  require(n >= 1, ErrorCode::InvalidArgument, "empty input");

  Contingency ct;
  ct.build(pred, truth);
  const double nd = static_cast<double>(n);

  double h_pred = 0.0;
  for (std::uint64_t b : ct.pred_sizes)
    if (b) h_pred -= (b / nd) * std::log(b / nd);
  double h_truth = 0.0;
  for (std::uint64_t a : ct.truth_sizes)
    if (a) h_truth -= (a / nd) * std::log(a / nd);

  if (h_pred == 0.0 && h_truth == 0.0) return 1.0;
  if (h_pred == 0.0 || h_truth == 0.0) return 0.0;

  double mi = 0.0;
  for (int p = 0; p < ct.kp; ++p) {
    for (int t = 0; t < ct.kt; ++t) {
      const std::uint64_t c = ct.cells[static_cast<std::size_t>(p) * ct.kt + t];
      if (!c) continue;
      mi += (c / nd) * std::log((nd * c) / (static_cast<double>(ct.pred_sizes[p]) *
                                            static_cast<double>(ct.truth_sizes[t])));
    }
  }
  const double score = mi / std::sqrt(h_pred * h_truth);
  return std::clamp(score, 0.0, 1.0);
}

double purity(const ClusterAssignment& pred, const std::vector<int>& truth) {
  const std::size_t n = truth.size();
  require(pred.labels.size() == n, ErrorCode::LengthMismatch,
          "pred/truth length mismatch");
  require(n >= 1, ErrorCode::InvalidArgument, "empty input");

  Contingency ct;
  ct.build(pred, truth);
  std::uint64_t hits = 0;
  for (int p = 0; p < ct.kp; ++p) {
    std::uint64_t best = 0;
    for (int t = 0; t < ct.kt; ++t)
      best = std::max(best, ct.cells[static_cast<std::size_t>(p) * ct.kt + t]);
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace svs
