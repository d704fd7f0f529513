#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svs/errors.hpp"

namespace svs {

/// Identity of one view: (category, object, pose, view) within a dataset.
struct ViewId {
  std::string category;
  int object_index = 0;
  int pose_index = 0;
  int view_index = 0;

  bool operator==(const ViewId&) const = default;
};

/// One view of one object in one pose. `features` is the deep-feature
/// embedding of the image; `is_top` flags the pose's top-down observation.
struct ViewRecord {
  ViewId id;
  double theta = 0.0;  // degrees in [0, 360)
  double phi = 0.0;    // degrees in (0, 90]
  bool is_top = false;
  std::vector<float> features;
};

/// A pose with its view rows (indices into DatasetModel::records()).
struct PoseRef {
  int category_idx = 0;
  int object_index = 0;
  int pose_index = 0;
  std::vector<int> view_rows;
  int top_row = -1;
};

/// Immutable collection of view records plus navigation indices.
/// Validated on construction; safe for concurrent shared reads afterwards.
class DatasetModel {
 public:
  DatasetModel(std::vector<ViewRecord> records, int feature_dim,
               std::vector<std::string> category_list);

  const std::vector<ViewRecord>& records() const { return records_; }
  int feature_dim() const { return feature_dim_; }
  const std::vector<std::string>& categories() const { return categories_; }

  /// Index of `name` in the category list, or -1.
  int category_index(const std::string& name) const;

  int record_category_idx(int row) const { return record_category_idx_[row]; }

  /// Pose id (index into poses()) owning this record row.
  int pose_of_row(int row) const { return record_pose_id_[row]; }

  /// Row of the record with this id, or -1.
  int find_row(const ViewId& id) const;

  /// Poses in canonical order (category_idx, object, pose).
  const std::vector<PoseRef>& poses() const { return poses_; }

  /// Pose ids (indices into poses()) grouped by category index.
  const std::vector<std::vector<int>>& poses_by_category() const {
    return poses_by_category_;
  }

  /// Object indices present in a category, ascending.
  const std::vector<std::vector<int>>& objects_by_category() const {
    return objects_by_category_;
  }

  /// Pose ids of one (category_idx, object_index), ascending pose_index.
  const std::vector<int>& poses_of_object(int category_idx,
                                          int object_index) const;

 private:
  std::vector<ViewRecord> records_;
  int feature_dim_ = 0;
  std::vector<std::string> categories_;
  std::vector<int> record_category_idx_;
  std::vector<int> record_pose_id_;
  std::vector<PoseRef> poses_;
  std::vector<std::vector<int>> poses_by_category_;
  std::vector<std::vector<int>> objects_by_category_;
  // (category_idx, object_index) -> pose ids
  std::vector<std::vector<std::vector<int>>> object_poses_;
};

/// Disjoint train/test category partition.
struct CategorySplit {
  std::vector<std::string> train_categories;  // sorted
  std::vector<std::string> test_categories;   // sorted

  bool is_test(const std::string& category) const;
};

// Binary feature store, little-endian:
//   magic "SVSF", u32 version=1, u32 feature_dim, u64 n_records,
//   u32 category-table length, UTF-8 category table ('\n'-joined names),
//   then per record {u16 category_idx, u16 object_idx, u16 pose_idx,
//   u16 view_idx, f32 theta, f32 phi, u8 is_top, f32[feature_dim]}.
DatasetModel load_feature_store(const std::filesystem::path& path);
void save_feature_store(const DatasetModel& model,
                        const std::filesystem::path& path);

// Text import, one record per line:
//   category,object,pose,view,theta,phi,is_top,f0,f1,...
// '#' starts a comment line.
DatasetModel import_feature_text(const std::filesystem::path& path);

/// Deterministically isolates n_test categories for held-out evaluation.
CategorySplit split_categories(const DatasetModel& model, int n_test,
                               std::uint64_t seed);

}  // namespace svs
