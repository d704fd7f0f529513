#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svs/clustering.hpp"
#include "svs/dataset.hpp"
#include "svs/rng.hpp"

namespace svs {

/// A sampled clustering problem: view rows into a DatasetModel plus their
/// hidden ground-truth category labels. Holds at most one view per
/// (object, pose) and at least two distinct categories.
struct ClusteringProblem {
  std::vector<int> view_rows;
  std::vector<int> truth;  // category indices aligned with view_rows
  int n_categories = 0;
};

struct SamplerConfig {
  std::uint64_t n_problems = 100000;
  // Floor on the number of problems containing each train view; sampling
  // continues with forced inclusion until every view reaches it. 0 disables
  // the floor.
  std::uint64_t min_coverage = 1000;
  int categories_min = 2;
  int categories_max = 10;
  int objects_min = 1;
  int objects_max = 1 << 20;  // clamped to per-category availability
  std::uint64_t seed = 0;
  // Offsets the problem index sub-streams, so one long run can be split
  // across processes and the score files merged.
  std::uint64_t problem_index_offset = 0;
  int threads = 1;
  std::uint64_t progress_every = 0;  // stderr coverage audit cadence; 0 = off
};

/// Sums are accumulated in fixed point (units of 2^-32) so they are exactly
/// additive and independent of thread count and merge order.
class ScoreFixed {
 public:
  void add(double value_01) {
    fixed_ += static_cast<std::uint64_t>(
        std::llround(value_01 * 4294967296.0));
  }
  void add_raw(std::uint64_t fixed) { fixed_ += fixed; }
  std::uint64_t raw() const { return fixed_; }
  double value() const { return static_cast<double>(fixed_) * 0x1.0p-32; }
  static std::uint64_t quantize(double value_01) {
    return static_cast<std::uint64_t>(std::llround(value_01 * 4294967296.0));
  }

 private:
  std::uint64_t fixed_ = 0;
};

/// Accumulated per-view semantic scores.
class ScoreTable {
 public:
  struct Entry {
    ViewId id;
    double theta = 0.0;
    double phi = 0.0;
    bool is_top = false;
    std::uint64_t sum_individual_fx = 0;  // sum of per-view FM, fixed point
    std::uint64_t sum_global_fx = 0;      // sum of whole-problem FM
    std::uint64_t n_problems = 0;         // problems containing this view
    double scaled = 0.0;                  // per-pose rescaled s_hat

    double sum_individual() const {
      return static_cast<double>(sum_individual_fx) * 0x1.0p-32;
    }
    double sum_global() const {
      return static_cast<double>(sum_global_fx) * 0x1.0p-32;
    }
    double s_hat() const {
      return n_problems ? sum_individual() / static_cast<double>(n_problems)
                        : 0.0;
    }
    double S_hat() const {
      return n_problems ? sum_global() / static_cast<double>(n_problems)
                        : 0.0;
    }
  };

  std::vector<Entry> entries;

  /// Index of the entry with this id, or -1.
  int find(const ViewId& id) const;
};

/// Draws one clustering problem: category count uniform in the configured
/// range (clamped to availability), then categories, objects, one pose per
/// object and one view per pose, all uniform.
ClusteringProblem sample_problem(const DatasetModel& model,
                                 const std::vector<int>& allowed_categories,
                                 const SamplerConfig& cfg, Rng& rng);

/// Like sample_problem but guaranteed to contain the given view row; used
/// to repair coverage shortfalls.
ClusteringProblem sample_problem_including(
    const DatasetModel& model, const std::vector<int>& allowed_categories,
    const SamplerConfig& cfg, Rng& rng, int forced_row);

/// Runs the Monte-Carlo loop over the train categories of `split`: clusters
/// each sampled problem with `pipeline`, scores it with the
/// Fowlkes-Mallows index and adds the per-view and global scores into the
/// table. Deterministic for a fixed seed; sums are exact regardless of
/// thread count.
ScoreTable accumulate_scores(const DatasetModel& model,
                             const CategorySplit& split,
                             const PipelineConfig& pipeline,
                             const SamplerConfig& cfg);

/// Min-max rescales s_hat within each (category, object, pose) into
/// `scaled`; a pose whose views all share one score gets 0.5 everywhere.
void rescale_per_pose(ScoreTable& table);

/// Element-wise sum of two tables over the same view set (exact).
ScoreTable merge_scores(const ScoreTable& a, const ScoreTable& b);

// Score file, little-endian: magic "SVSS", u32 version=1,
// u64 config_digest, u32 category-table length + UTF-8 table, u64 n_views,
// then per view {u16 category_idx, u16 object_idx, u16 pose_idx,
// u16 view_idx, f32 theta, f32 phi, u8 is_top, f64 sum_individual,
// f64 sum_global, u64 n_problems, f64 scaled}.
void save_scores(const ScoreTable& table, const std::filesystem::path& path,
                 std::uint64_t config_digest = 0);
ScoreTable load_scores(const std::filesystem::path& path);

}  // namespace svs
