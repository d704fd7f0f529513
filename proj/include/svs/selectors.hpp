#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svs/clustering.hpp"
#include "svs/dataset.hpp"
#include "svs/mc_scoring.hpp"
#include "svs/regressor.hpp"

namespace svs {

enum class SelectorKind { Top, Rand, OptInd, OptGlob, Model };

struct SelectorId {
  SelectorKind kind = SelectorKind::Top;
  std::string model_path;  // Model selector only

  std::string name() const;
};

/// Parses "TOP", "RAND", "OPT_IND", "OPT_GLOB" or "MODEL".
SelectorId selector_from_name(const std::string& name);

/// Picks one view of a pose. pose_views must be non-empty and all from one
/// (object, pose). OPT_* need `scores` covering the views; MODEL needs the
/// trained regressor plus the pose's top-view embedding. Score ties break
/// to the smallest (theta, phi).
const ViewRecord* select_view(const SelectorId& selector,
                              const std::vector<const ViewRecord*>& pose_views,
                              const ScoreTable* scores,
                              const RegressorState* model,
                              std::span<const float> top_embedding, Rng& rng);

struct EvalRow {
  std::string pipeline;
  std::string selector;
  double mean_fm = 0.0;
  double mean_nmi = 0.0;
  double mean_pur = 0.0;
  std::uint64_t n_problems = 0;
};

struct EvalReport {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
  int categories_min = 0;
  int categories_max = 0;
  int objects_min = 0;
  int objects_max = 0;
  std::vector<EvalRow> rows;  // pipeline-major, selectors in request order
};

struct EvalOptions {
  std::uint64_t n_problems = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  // Reachability mask: views at these theta values are skipped by every
  // selector that moves the camera (TOP always stays available as the
  // initial observation).
  std::vector<double> excluded_thetas;
  int categories_min = 2;
  int categories_max = 10;
  int objects_min = 1;
  int objects_max = 1 << 20;
  // When set, receives the per-problem FM of the first pipeline,
  // [selector][problem]; used for paired-difference analysis.
  std::vector<std::vector<double>>* per_problem_fm = nullptr;
};

/// Paired comparison of view selectors: every selector sees the identical
/// problem sequence (same categories, objects and poses); only the chosen
/// views differ. Each problem is clustered per pipeline and scored with
/// FM, NMI and purity; the report holds the means.
EvalReport evaluate(const DatasetModel& model,
                    const std::vector<std::string>& categories,
                    const std::vector<SelectorId>& selectors,
                    const std::vector<PipelineConfig>& pipelines,
                    const EvalOptions& opts, const ScoreTable* scores,
                    const RegressorState* regressor);

/// Writes the report as JSON plus, when table_path is given, an aligned
/// plain-text table.
void report_render(const EvalReport& report,
                   const std::filesystem::path& json_path,
                   const std::optional<std::filesystem::path>& table_path = {});

EvalReport report_parse(const std::filesystem::path& json_path);

/// Training-set assembly: one example per scored view, using the pose's
/// top-view feature vector as the embedding and the rescaled score as the
/// target.
std::vector<TrainingExample> build_training_set(const DatasetModel& model,
                                                const ScoreTable& table);

}  // namespace svs
