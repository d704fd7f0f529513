#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "svs/dataset.hpp"

namespace svs {

enum class QualityModel { RandomUniform, PhiDependent };

/// Shape and signal parameters of a generated feature-space world.
/// Category centers sit on a sphere at pairwise distance >=
/// category_separation; a view of quality q is placed at
/// q*anchor + (1-q)*confounder + noise, where the confounder direction is
/// shared by every category, so low-quality views of different objects are
/// mutually confusable rather than merely noisy.
struct WorldConfig {
  int n_categories = 29;
  int objects_min = 4;
  int objects_max = 6;
  int poses_per_object = 3;
  // Views per pose, top view included; the remaining views are a random
  // subset of the default pose grid. min == max pins the count.
  int views_per_pose_min = 21;
  int views_per_pose_max = 21;
  int feature_dim = 64;
  double category_separation = 10.0;
  double object_spread = 1.0;
  double pose_spread = 0.5;
  double noise_scale = 0.4;
  QualityModel quality_model = QualityModel::PhiDependent;
  // PhiDependent: q falls smoothly from quality_hi at phi=45 to quality_lo
  // at phi=90 (top), plus uniform jitter of +/- quality_jitter. The
  // falloff exponent shapes the curve: above 1 it keeps most slanted
  // views near quality_hi and steepens the drop toward the top view.
  double quality_hi = 0.85;
  double quality_lo = 0.15;
  double quality_jitter = 0.03;
  double quality_falloff = 1.25;
  std::uint64_t seed = 0;
};

/// Ground-truth per-view semantic goodness, aligned with model record rows.
struct QualityMap {
  std::vector<double> q_by_row;

  double at_row(int row) const { return q_by_row[static_cast<std::size_t>(row)]; }
};

std::pair<DatasetModel, QualityMap> generate_world(const WorldConfig& cfg);

/// World with the reference dataset shape: 29 categories, 4-6 objects each,
/// 3 poses, 17-21 views per pose.
std::pair<DatasetModel, QualityMap> emit_paper_shaped_world(std::uint64_t seed);

// Quality sidecar, text: "category,object,pose,view,q" per line, '#'
// comments.
void save_quality_map(const DatasetModel& model, const QualityMap& map,
                      const std::filesystem::path& path,
                      std::uint64_t config_digest = 0);
QualityMap load_quality_map(const DatasetModel& model,
                            const std::filesystem::path& path);

}  // namespace svs
