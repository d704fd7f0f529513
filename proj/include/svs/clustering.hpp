#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svs/dataset.hpp"
#include "svs/metrics.hpp"

namespace svs {

enum class ClusterAlgorithm { Kmeans, Agglomerative };
enum class Linkage { Average, Ward, Complete };

struct PipelineConfig {
  ClusterAlgorithm algorithm = ClusterAlgorithm::Agglomerative;
  Linkage linkage = Linkage::Average;
  int kmeans_restarts = 10;
  int kmeans_max_iters = 300;
  bool l2_normalize = false;   // L2-normalize rows before clustering
  bool standardize = false;    // per-dimension standardization
  std::uint64_t seed = 0;

  std::string name() const;
};

/// Parses "agg_avg", "agg_ward", "agg_complete" or "kmeans".
PipelineConfig pipeline_from_name(const std::string& name,
                                  std::uint64_t seed = 0);

/// Scratch buffers reused across calls in hot loops.
struct ClusterScratch {
  std::vector<double> points;
  std::vector<double> dist;
  std::vector<double> aux;
  std::vector<double> centers;
  std::vector<double> best_centers;
  std::vector<int> ints;
  std::vector<int> sizes;
  std::vector<int> active;
  std::vector<int> member_label;
  std::vector<int> best_labels;
};

/// Lloyd k-means over a row-major n x d matrix. Farthest-point seeding,
/// `restarts` starts, minimum-inertia solution returned. Deterministic for
/// a fixed seed.
ClusterAssignment kmeans(std::span<const double> points, int n, int d, int k,
                         const PipelineConfig& cfg);

struct KmeansResult {
  ClusterAssignment assignment;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // per Lloyd iteration of best restart
};

KmeansResult kmeans_detailed(std::span<const double> points, int n, int d,
                             int k, const PipelineConfig& cfg);

/// Bottom-up merging by the configured linkage on Euclidean distance until
/// k clusters remain. Ties broken by the smallest (cluster, cluster) index
/// pair. Labels are assigned by ascending smallest member index.
ClusterAssignment agglomerative(std::span<const double> points, int n, int d,
                                int k, const PipelineConfig& cfg);

/// Clusters the feature vectors of the given records, dispatching on
/// cfg.algorithm.
ClusterAssignment cluster_views(const std::vector<const ViewRecord*>& views,
                                int k, const PipelineConfig& cfg);

/// Zero-copy entry point used by the Monte-Carlo scorer: points are already
/// laid out row-major in scratch.points.
void cluster_points(int n, int d, int k, const PipelineConfig& cfg,
                    ClusterScratch& scratch, ClusterAssignment& out);

}  // namespace svs
