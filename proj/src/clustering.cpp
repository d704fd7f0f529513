#include "svs/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "svs/rng.hpp"

namespace svs {

std::string PipelineConfig::name() const {
  if (algorithm == ClusterAlgorithm::Kmeans) return "kmeans";
  switch (linkage) {
    case Linkage::Average: return "agg_avg";
    case Linkage::Ward: return "agg_ward";
    case Linkage::Complete: return "agg_complete";
  }
  return "agg";
}

PipelineConfig pipeline_from_name(const std::string& name,
                                  std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.seed = seed;
  if (name == "kmeans") {
    cfg.algorithm = ClusterAlgorithm::Kmeans;
  } else if (name == "agg_avg") {
    cfg.algorithm = ClusterAlgorithm::Agglomerative;
    cfg.linkage = Linkage::Average;
  } else if (name == "agg_ward") {
    cfg.algorithm = ClusterAlgorithm::Agglomerative;
    cfg.linkage = Linkage::Ward;
  } else if (name == "agg_complete") {
    cfg.algorithm = ClusterAlgorithm::Agglomerative;
    cfg.linkage = Linkage::Complete;
  } else {
    fail(ErrorCode::InvalidArgument, "unknown pipeline '" + name + "'");
  }
  return cfg;
}

namespace {

void check_points(std::span<const double> points, int n, int d, int k) {
  require(n >= 1 && d >= 1, ErrorCode::InvalidArgument, "empty point matrix");
  require(static_cast<std::size_t>(n) * d == points.size(),
          ErrorCode::DimensionMismatch, "point matrix size mismatch");
  require(k >= 1 && k <= n, ErrorCode::InvalidArgument,
          "k must satisfy 1 <= k <= n");
  for (double v : points)
    require(std::isfinite(v), ErrorCode::NonFiniteValue,
            "non-finite coordinate");
}

double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

// ---------------------------------------------------------------------------
// k-means

struct LloydRun {
  std::vector<int> labels;
  double inertia = 0.0;
  std::vector<double> history;
};

void seed_centers(std::span<const double> pts, int n, int d, int k,
                  int first_center, std::vector<double>& centers,
                  std::vector<double>& min_dist) {
  centers.assign(static_cast<std::size_t>(k) * d, 0.0);
  std::copy_n(pts.data() + static_cast<std::size_t>(first_center) * d, d,
              centers.data());
  min_dist.assign(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    const double* prev = centers.data() + static_cast<std::size_t>(c - 1) * d;
    int far = 0;
    double far_dist = -1.0;
    for (int i = 0; i < n; ++i) {
      const double dd = sq_dist(pts.data() + static_cast<std::size_t>(i) * d,
                                prev, d);
      if (dd < min_dist[i]) min_dist[i] = dd;
      if (min_dist[i] > far_dist) {
        far_dist = min_dist[i];
        far = i;
      }
    }
    std::copy_n(pts.data() + static_cast<std::size_t>(far) * d, d,
                centers.data() + static_cast<std::size_t>(c) * d);
  }
}

LloydRun lloyd(std::span<const double> pts, int n, int d, int k,
               int first_center, int max_iters) {
  std::vector<double> centers, min_dist;
  seed_centers(pts, n, d, k, first_center, centers, min_dist);

  std::vector<int> labels(n, -1);
  std::vector<double> point_dist(n, 0.0);
  std::vector<int> counts(k, 0);
  LloydRun run;

  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment; nearest center, ties to the smallest center id.
    bool changed = false;
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* x = pts.data() + static_cast<std::size_t>(i) * d;
      int best = 0;
      double best_dist = sq_dist(x, centers.data(), d);
      for (int c = 1; c < k; ++c) {
        const double dd =
            sq_dist(x, centers.data() + static_cast<std::size_t>(c) * d, d);
        if (dd < best_dist) {
          best_dist = dd;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
      point_dist[i] = best_dist;
      inertia += best_dist;
    }

    // Repair empty clusters with the point farthest from its own center.
    counts.assign(k, 0);
    for (int i = 0; i < n; ++i) ++counts[labels[i]];
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_dist = 0.0;
      for (int i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue;
        if (point_dist[i] > far_dist) {
          far_dist = point_dist[i];
          far = i;
        }
      }
      if (far < 0) continue;  // only duplicate points left
      --counts[labels[far]];
      labels[far] = c;
      counts[c] = 1;
      point_dist[far] = 0.0;
      changed = true;
    }

    run.history.push_back(inertia);
    run.inertia = inertia;
    if (!changed && iter > 0) break;

    // Update step.
    centers.assign(static_cast<std::size_t>(k) * d, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* x = pts.data() + static_cast<std::size_t>(i) * d;
      double* c = centers.data() + static_cast<std::size_t>(labels[i]) * d;
      for (int j = 0; j < d; ++j) c[j] += x[j];
    }
    for (int c = 0; c < k; ++c) {
      if (!counts[c]) continue;
      double* ctr = centers.data() + static_cast<std::size_t>(c) * d;
      for (int j = 0; j < d; ++j) ctr[j] /= counts[c];
    }
  }

  // Final inertia against the final centers.
  double inertia = 0.0;
  for (int i = 0; i < n; ++i)
    inertia += sq_dist(pts.data() + static_cast<std::size_t>(i) * d,
                       centers.data() + static_cast<std::size_t>(labels[i]) * d,
                       d);
  run.inertia = inertia;
  run.labels = std::move(labels);
  return run;
}

int farthest_from_centroid(std::span<const double> pts, int n, int d) {
  std::vector<double> centroid(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      centroid[j] += pts[static_cast<std::size_t>(i) * d + j];
  for (double& v : centroid) v /= n;
  int far = 0;
  double far_dist = -1.0;
  for (int i = 0; i < n; ++i) {
    const double dd = sq_dist(pts.data() + static_cast<std::size_t>(i) * d,
                              centroid.data(), d);
    if (dd > far_dist) {
      far_dist = dd;
      far = i;
    }
  }
  return far;
}

// Compacts labels so cluster ids are ranked by smallest member index.
void canonicalize_labels(std::vector<int>& labels, int k) {
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int& v : labels) {
    if (remap[v] < 0) remap[v] = next++;
    v = remap[v];
  }
}

}  // namespace

KmeansResult kmeans_detailed(std::span<const double> points, int n, int d,
                             int k, const PipelineConfig& cfg) {
  check_points(points, n, d, k);
  require(cfg.kmeans_restarts >= 1 && cfg.kmeans_max_iters >= 1,
          ErrorCode::InvalidArgument, "restarts and max_iters must be >= 1");

  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.kmeans_restarts; ++r) {
    // Restart 0 seeds from the centroid-farthest point so the run does not
    // depend on row order; later restarts draw a random first center.
    int first;
    if (r == 0) {
      first = farthest_from_centroid(points, n, d);
    } else {
      Rng rng = Rng::substream(cfg.seed, "kmeans-restart",
                               static_cast<std::uint64_t>(r));
      first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    }
    LloydRun run = lloyd(points, n, d, k, first, cfg.kmeans_max_iters);
    if (run.inertia < best.inertia) {
      best.inertia = run.inertia;
      best.assignment.labels = std::move(run.labels);
      best.inertia_history = std::move(run.history);
    }
  }
  best.assignment.k = k;
  canonicalize_labels(best.assignment.labels, k);
  return best;
}

ClusterAssignment kmeans(std::span<const double> points, int n, int d, int k,
                         const PipelineConfig& cfg) {
  return kmeans_detailed(points, n, d, k, cfg).assignment;
}

ClusterAssignment agglomerative(std::span<const double> points, int n, int d,
                                int k, const PipelineConfig& cfg) {
  check_points(points, n, d, k);
  ClusterScratch scratch;
  scratch.points.assign(points.begin(), points.end());
  PipelineConfig agg = cfg;
  agg.algorithm = ClusterAlgorithm::Agglomerative;
  agg.l2_normalize = false;
  agg.standardize = false;
  ClusterAssignment out;
  cluster_points(n, d, k, agg, scratch, out);
  return out;
}

namespace {

// Merge loop shared by the three linkages. `dist` holds, per active pair,
// the linkage statistic: sum of member distances (average), max member
// distance (complete), or the ward merge cost.
void agglomerate(int n, int d, int k, Linkage linkage, ClusterScratch& s,
                 std::vector<int>& labels) {
  const std::size_t nn = static_cast<std::size_t>(n);
  s.dist.assign(nn * nn, 0.0);
  s.sizes.assign(n, 1);
  s.active.resize(n);
  for (int i = 0; i < n; ++i) s.active[i] = i;
  labels.resize(n);
  for (int i = 0; i < n; ++i) labels[i] = i;

  double* dist = s.dist.data();
  const double* pts = s.points.data();

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double sq = sq_dist(pts + static_cast<std::size_t>(i) * d,
                                pts + static_cast<std::size_t>(j) * d, d);
      // Ward cost for singletons is sq/2; average/complete use distance.
      const double v = linkage == Linkage::Ward ? 0.5 * sq : std::sqrt(sq);
      dist[i * nn + j] = v;
      dist[j * nn + i] = v;
    }
  }

  if (linkage == Linkage::Ward) {
    // centroids kept in aux for the exact merge update below
    s.aux.assign(s.points.begin(), s.points.end());
  }

  int n_clusters = n;
  while (n_clusters > k) {
    int best_a = -1, best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t ia = 0; ia < s.active.size(); ++ia) {
      const int a = s.active[ia];
      for (std::size_t ib = ia + 1; ib < s.active.size(); ++ib) {
        const int b = s.active[ib];
        double value = dist[a * nn + b];
        if (linkage == Linkage::Average)
          value /= static_cast<double>(s.sizes[a]) * s.sizes[b];
        if (value < best) {
          best = value;
          best_a = a;
          best_b = b;
        }
      }
    }

    const int a = best_a, b = best_b;  // a < b by scan order
    for (const int c : s.active) {
      if (c == a || c == b) continue;
      switch (linkage) {
        case Linkage::Average:
          dist[a * nn + c] += dist[b * nn + c];
          break;
        case Linkage::Complete:
          dist[a * nn + c] = std::max(dist[a * nn + c], dist[b * nn + c]);
          break;
        case Linkage::Ward: {
          // Lance-Williams, exact for the ward cost.
          const double na = s.sizes[a], nb = s.sizes[b], nc = s.sizes[c];
          dist[a * nn + c] = ((na + nc) * dist[a * nn + c] +
                              (nb + nc) * dist[b * nn + c] -
                              nc * dist[a * nn + b]) /
                             (na + nb + nc);
          break;
        }
      }
      dist[c * nn + a] = dist[a * nn + c];
    }
    s.sizes[a] += s.sizes[b];
    for (int& l : labels)
      if (l == b) l = a;
    s.active.erase(std::find(s.active.begin(), s.active.end(), b));
    --n_clusters;
  }

  canonicalize_labels(labels, n);
}

void normalize_rows(std::vector<double>& pts, int n, int d,
                    const PipelineConfig& cfg) {
  if (cfg.standardize) {
    for (int j = 0; j < d; ++j) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += pts[static_cast<std::size_t>(i) * d + j];
      mean /= n;
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const double diff = pts[static_cast<std::size_t>(i) * d + j] - mean;
        var += diff * diff;
      }
      var /= n;
      const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
      for (int i = 0; i < n; ++i) {
        double& v = pts[static_cast<std::size_t>(i) * d + j];
        v = (v - mean) * scale;
      }
    }
  }
  if (cfg.l2_normalize) {
    for (int i = 0; i < n; ++i) {
      double* row = pts.data() + static_cast<std::size_t>(i) * d;
      double norm = 0.0;
      for (int j = 0; j < d; ++j) norm += row[j] * row[j];
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (int j = 0; j < d; ++j) row[j] /= norm;
    }
  }
}

}  // namespace

void cluster_points(int n, int d, int k, const PipelineConfig& cfg,
                    ClusterScratch& scratch, ClusterAssignment& out) {
  check_points(scratch.points, n, d, k);
  normalize_rows(scratch.points, n, d, cfg);

  if (cfg.algorithm == ClusterAlgorithm::Kmeans) {
    out = kmeans(scratch.points, n, d, k, cfg);
    return;
  }
  agglomerate(n, d, k, cfg.linkage, scratch, out.labels);
  out.k = k;
}

ClusterAssignment cluster_views(const std::vector<const ViewRecord*>& views,
                                int k, const PipelineConfig& cfg) {
  require(!views.empty(), ErrorCode::InvalidArgument, "no views to cluster");
  const int n = static_cast<int>(views.size());
  const int d = static_cast<int>(views[0]->features.size());
  for (const ViewRecord* v : views)
    require(static_cast<int>(v->features.size()) == d,
            ErrorCode::DimensionMismatch,
            "mixed feature dimensions in cluster_views");

  ClusterScratch scratch;
  scratch.points.resize(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      scratch.points[static_cast<std::size_t>(i) * d + j] =
          static_cast<double>(views[i]->features[j]);

  ClusterAssignment out;
  cluster_points(n, d, k, cfg, scratch, out);
  return out;
}

}  // namespace svs
