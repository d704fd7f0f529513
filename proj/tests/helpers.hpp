#pragma once

// Test-only reference implementations. These stay independent of the
// library code paths they check: pair statistics by O(n^2) enumeration,
// agglomeration by recomputing every linkage from scratch, NMI from an
// explicitly built contingency table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "svs/clustering.hpp"
#include "svs/metrics.hpp"

namespace testutil {

struct BrutePairs {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::vector<std::uint64_t> item_tp, item_fp, item_fn;
};

inline BrutePairs brute_force_pairs(const std::vector<int>& pred,
                                    const std::vector<int>& truth) {
  const std::size_t n = truth.size();
  BrutePairs out;
  out.item_tp.assign(n, 0);
  out.item_fp.assign(n, 0);
  out.item_fn.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same_truth = truth[i] == truth[j];
      const bool same_pred = pred[i] == pred[j];
      if (same_truth && same_pred) {
        ++out.tp;
        ++out.item_tp[i];
        ++out.item_tp[j];
      } else if (!same_truth && same_pred) {
        ++out.fp;
        ++out.item_fp[i];
        ++out.item_fp[j];
      } else if (same_truth && !same_pred) {
        ++out.fn;
        ++out.item_fn[i];
        ++out.item_fn[j];
      } else {
        ++out.tn;
      }
    }
  }
  return out;
}

inline double brute_fm(const BrutePairs& bp) {
  const double a = static_cast<double>(bp.tp + bp.fp);
  const double b = static_cast<double>(bp.tp + bp.fn);
  if (a == 0.0 || b == 0.0) return 0.0;
  return static_cast<double>(bp.tp) / std::sqrt(a * b);
}

inline double brute_fm_item(const BrutePairs& bp, std::size_t i) {
  const double a = static_cast<double>(bp.item_tp[i] + bp.item_fp[i]);
  const double b = static_cast<double>(bp.item_tp[i] + bp.item_fn[i]);
  if (a == 0.0 || b == 0.0) return 0.0;
  return static_cast<double>(bp.item_tp[i]) / std::sqrt(a * b);
}

inline double brute_nmi(const std::vector<int>& pred,
                        const std::vector<int>& truth) {
  const double n = static_cast<double>(truth.size());
  std::map<int, int> cp, ct;
  std::map<std::pair<int, int>, int> joint;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++cp[pred[i]];
    ++ct[truth[i]];
    ++joint[{pred[i], truth[i]}];
  }
  double hp = 0.0, ht = 0.0;
  for (auto& [k, c] : cp) hp -= (c / n) * std::log(c / n);
  for (auto& [k, c] : ct) ht -= (c / n) * std::log(c / n);
  if (hp == 0.0 && ht == 0.0) return 1.0;
  if (hp == 0.0 || ht == 0.0) return 0.0;
  double mi = 0.0;
  for (auto& [key, c] : joint)
    mi += (c / n) * std::log(n * c / (static_cast<double>(cp[key.first]) *
                                      ct[key.second]));
  return mi / std::sqrt(hp * ht);
}

inline double brute_purity(const std::vector<int>& pred,
                           const std::vector<int>& truth) {
  std::map<int, std::map<int, int>> clusters;
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++clusters[pred[i]][truth[i]];
  double hits = 0.0;
  for (auto& [c, classes] : clusters) {
    int best = 0;
    for (auto& [t, count] : classes) best = std::max(best, count);
    hits += best;
  }
  return hits / static_cast<double>(truth.size());
}

/// Naive agglomerative reference: every step recomputes each active pair's
/// linkage from the base distances and member lists. Same merge and
/// tie-break conventions as the production code, different machinery.
inline std::vector<int> naive_agglomerative(const std::vector<double>& pts,
                                            int n, int d, int k,
                                            svs::Linkage linkage) {
  std::vector<double> base(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = pts[static_cast<std::size_t>(i) * d + c] -
                            pts[static_cast<std::size_t>(j) * d + c];
        s += diff * diff;
      }
      base[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
    }
  }

  std::vector<std::vector<int>> members(n);
  for (int i = 0; i < n; ++i) members[i] = {i};
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);

  const auto linkage_value = [&](int a, int b) {
    const auto& ma = members[a];
    const auto& mb = members[b];
    if (linkage == svs::Linkage::Complete) {
      double worst = 0.0;
      for (int i : ma)
        for (int j : mb)
          worst = std::max(worst, base[static_cast<std::size_t>(i) * n + j]);
      return worst;
    }
    if (linkage == svs::Linkage::Average) {
      double sum = 0.0;
      for (int i : ma)
        for (int j : mb) sum += base[static_cast<std::size_t>(i) * n + j];
      return sum / (static_cast<double>(ma.size()) * mb.size());
    }
    // Ward: (na nb / (na + nb)) * ||centroid_a - centroid_b||^2
    std::vector<double> ca(d, 0.0), cb(d, 0.0);
    for (int i : ma)
      for (int c = 0; c < d; ++c)
        ca[c] += pts[static_cast<std::size_t>(i) * d + c];
    for (int j : mb)
      for (int c = 0; c < d; ++c)
        cb[c] += pts[static_cast<std::size_t>(j) * d + c];
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      const double diff = ca[c] / ma.size() - cb[c] / mb.size();
      s += diff * diff;
    }
    const double na = static_cast<double>(ma.size());
    const double nb = static_cast<double>(mb.size());
    return na * nb / (na + nb) * s;
  };

  while (static_cast<int>(ids.size()) > k) {
    int best_a = -1, best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t ia = 0; ia < ids.size(); ++ia) {
      for (std::size_t ib = ia + 1; ib < ids.size(); ++ib) {
        const double v = linkage_value(ids[ia], ids[ib]);
        if (v < best) {
          best = v;
          best_a = ids[ia];
          best_b = ids[ib];
        }
      }
    }
    auto& ma = members[best_a];
    auto& mb = members[best_b];
    ma.insert(ma.end(), mb.begin(), mb.end());
    mb.clear();
    ids.erase(std::find(ids.begin(), ids.end(), best_b));
  }

  std::vector<int> labels(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] >= 0) continue;
    for (int id : ids) {
      const auto& m = members[id];
      if (std::find(m.begin(), m.end(), i) != m.end()) {
        for (int j : m) labels[j] = next;
        ++next;
        break;
      }
    }
  }
  return labels;
}

/// True when the two labelings define the same partition.
inline bool same_partition(const std::vector<int>& a,
                           const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto f = fwd.emplace(a[i], b[i]);
    if (!f.second && f.first->second != b[i]) return false;
    const auto g = bwd.emplace(b[i], a[i]);
    if (!g.second && g.first->second != a[i]) return false;
  }
  return true;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  const auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(xs);
  const std::vector<double> ry = ranks(ys);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// Unique temp directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
      auto candidate = base / ("svs_test_" + std::to_string(rd()));
      if (std::filesystem::create_directory(candidate)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
