#include <doctest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "svs/clustering.hpp"
#include "svs/mc_scoring.hpp"
#include "svs/metrics.hpp"
#include "svs/synthetic.hpp"

using svs::DatasetModel;
using svs::QualityMap;
using svs::WorldConfig;

namespace {

WorldConfig small_world(std::uint64_t seed) {
  WorldConfig cfg;
  cfg.n_categories = 4;
  cfg.objects_min = 2;
  cfg.objects_max = 2;
  cfg.poses_per_object = 2;
  cfg.views_per_pose_min = 6;
  cfg.views_per_pose_max = 6;
  cfg.feature_dim = 16;
  cfg.seed = seed;
  return cfg;
}

WorldConfig constant_quality_world(std::uint64_t seed, double q) {
  WorldConfig cfg = small_world(seed);
  cfg.quality_model = svs::QualityModel::PhiDependent;
  cfg.quality_hi = q;
  cfg.quality_lo = q;
  cfg.quality_jitter = 0.0;
  return cfg;
}

double mean_fm_over_problems(const DatasetModel& model, int n_problems,
                             std::uint64_t seed, double* analytic_out) {
  svs::SamplerConfig scfg;
  scfg.categories_min = 2;
  scfg.categories_max = 4;
  // Two objects per category keep every truth class non-singleton, so the
  // FM denominators never degenerate.
  scfg.objects_min = 2;
  std::vector<int> allowed;
  for (std::size_t i = 0; i < model.categories().size(); ++i)
    allowed.push_back(static_cast<int>(i));

  const svs::PipelineConfig pipeline;  // agglomerative average
  double fm_sum = 0.0;
  double analytic_sum = 0.0;
  for (int p = 0; p < n_problems; ++p) {
    svs::Rng rng = svs::Rng::substream(seed, "fm-baseline", p);
    const svs::ClusteringProblem problem =
        svs::sample_problem(model, allowed, scfg, rng);
    std::vector<const svs::ViewRecord*> views;
    for (int row : problem.view_rows)
      views.push_back(&model.records()[static_cast<std::size_t>(row)]);
    const svs::ClusterAssignment a =
        svs::cluster_views(views, problem.n_categories, pipeline);
    const svs::PairConfusion conf = svs::pair_confusion(a, problem.truth);
    fm_sum += svs::fm_global(conf);

    // Expected FM when the prediction is independent of the truth:
    // E[TP] = Qt*Qp/C(n,2) with fixed marginals, so E[FM] =
    // sqrt(Qt*Qp)/C(n,2).
    const double qt = static_cast<double>(conf.tp + conf.fn);
    const double qp = static_cast<double>(conf.tp + conf.fp);
    const double pairs = static_cast<double>(problem.view_rows.size() *
                                             (problem.view_rows.size() - 1)) /
                         2.0;
    analytic_sum += std::sqrt(qt * qp) / pairs;
  }
  if (analytic_out) *analytic_out = analytic_sum / n_problems;
  return fm_sum / n_problems;
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("perfect quality and zero noise cluster perfectly") {
  WorldConfig cfg = constant_quality_world(5, 1.0);
  cfg.object_spread = 0.0;
  cfg.pose_spread = 0.0;
  cfg.noise_scale = 0.0;
  auto [model, quality] = svs::generate_world(cfg);

  const double fm = mean_fm_over_problems(model, 200, 12, nullptr);
  CHECK(fm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero quality approaches the random-pairing baseline") {
  WorldConfig cfg = constant_quality_world(6, 0.0);
  cfg.noise_scale = 0.5;  // only noise distinguishes views
  auto [model, quality] = svs::generate_world(cfg);

  double analytic = 0.0;
  const double fm = mean_fm_over_problems(model, 3000, 13, &analytic);
  CHECK(std::abs(fm - analytic) < 0.03);
}

TEST_CASE("deterministic for a fixed seed") {
  auto [m1, q1] = svs::generate_world(small_world(42));
  auto [m2, q2] = svs::generate_world(small_world(42));
  REQUIRE(m1.records().size() == m2.records().size());
  CHECK(q1.q_by_row == q2.q_by_row);
  for (std::size_t i = 0; i < m1.records().size(); ++i) {
    CHECK(m1.records()[i].id == m2.records()[i].id);
    CHECK(m1.records()[i].features == m2.records()[i].features);
  }

  auto [m3, q3] = svs::generate_world(small_world(43));
  CHECK(q1.q_by_row != q3.q_by_row);
}

TEST_CASE("quality orders distance to the category center") {
  // With zero spread and zero noise every view sits on the segment between
  // the shared confounder and its category center, so being closer to the
  // pose's best view is the same as being closer to the center.
  WorldConfig cfg = small_world(9);
  cfg.object_spread = 0.0;
  cfg.pose_spread = 0.0;
  cfg.noise_scale = 0.0;
  cfg.quality_model = svs::QualityModel::RandomUniform;
  auto [model, quality] = svs::generate_world(cfg);

  for (const svs::PoseRef& pose : model.poses()) {
    int best_row = pose.view_rows[0];
    for (int row : pose.view_rows)
      if (quality.at_row(row) > quality.at_row(best_row)) best_row = row;
    const auto& best = model.records()[static_cast<std::size_t>(best_row)];

    const auto dist_to_best = [&](int row) {
      const auto& rec = model.records()[static_cast<std::size_t>(row)];
      double s = 0.0;
      for (std::size_t i = 0; i < rec.features.size(); ++i) {
        const double diff = rec.features[i] - best.features[i];
        s += diff * diff;
      }
      return std::sqrt(s);
    };
    for (int ra : pose.view_rows) {
      for (int rb : pose.view_rows) {
        if (quality.at_row(ra) > quality.at_row(rb) + 1e-9)
          CHECK(dist_to_best(ra) < dist_to_best(rb) + 1e-5);
      }
    }
  }
}

TEST_CASE("inter-category distance grows with quality") {
  double previous = -1.0;
  for (double q : {0.1, 0.4, 0.7, 1.0}) {
    auto [model, quality] = svs::generate_world(constant_quality_world(11, q));
    double sum = 0.0;
    int count = 0;
    const auto& records = model.records();
    for (std::size_t i = 0; i < records.size(); i += 3) {
      for (std::size_t j = i + 1; j < records.size(); j += 3) {
        if (model.record_category_idx(static_cast<int>(i)) ==
            model.record_category_idx(static_cast<int>(j)))
          continue;
        double s = 0.0;
        for (std::size_t c = 0; c < records[i].features.size(); ++c) {
          const double diff = records[i].features[c] - records[j].features[c];
          s += diff * diff;
        }
        sum += std::sqrt(s);
        ++count;
      }
    }
    const double mean = sum / count;
    CHECK(mean > previous);
    previous = mean;
  }
}

TEST_CASE("paper shaped world matches the reference statistics") {
  auto [model, quality] = svs::emit_paper_shaped_world(1);
  CHECK(model.categories().size() == 29);

  // Objects per category in [4, 6]; total in [116, 174].
  std::map<int, std::map<int, int>> objects;  // cat -> object -> poses
  for (const svs::PoseRef& pose : model.poses())
    ++objects[pose.category_idx][pose.object_index];
  int total_objects = 0;
  for (auto& [cat, per_object] : objects) {
    CHECK(per_object.size() >= 4);
    CHECK(per_object.size() <= 6);
    total_objects += static_cast<int>(per_object.size());
  }
  CHECK(total_objects >= 116);
  CHECK(total_objects <= 174);

  // 3 poses per object, at most 21 views per pose, top view present.
  for (auto& [cat, per_object] : objects)
    for (auto& [obj, poses] : per_object) CHECK(poses == 3);
  for (const svs::PoseRef& pose : model.poses()) {
    CHECK(pose.view_rows.size() >= 17);
    CHECK(pose.view_rows.size() <= 21);
    CHECK(pose.top_row >= 0);
  }
}

TEST_CASE("default world shape matches its configuration") {
  WorldConfig cfg;  // 29 categories, 4-6 objects, 3 poses, 21 views
  cfg.seed = 2;
  auto [model, quality] = svs::generate_world(cfg);
  const std::size_t n = model.records().size();
  CHECK(n >= 29u * 4 * 3 * 21);
  CHECK(n <= 29u * 6 * 3 * 21);
  for (const svs::PoseRef& pose : model.poses())
    CHECK(pose.view_rows.size() == 21);
}

TEST_CASE("quality sidecar round-trips") {
  testutil::TempDir dir;
  auto [model, quality] = svs::generate_world(small_world(21));
  const auto path = dir.file("quality.txt");
  svs::save_quality_map(model, quality, path, 0xdeadbeef);
  const QualityMap loaded = svs::load_quality_map(model, path);
  CHECK(loaded.q_by_row == quality.q_by_row);
}

TEST_CASE("infeasible separation reports an error") {
  WorldConfig cfg = small_world(3);
  cfg.feature_dim = 2;
  cfg.n_categories = 400;  // cannot pack 400 separated points on a circle
  try {
    (void)svs::generate_world(cfg);
    FAIL("expected separation failure");
  } catch (const svs::SvsError& e) {
    CHECK(e.code() == svs::ErrorCode::SeparationInfeasible);
  }
}

}  // TEST_SUITE
