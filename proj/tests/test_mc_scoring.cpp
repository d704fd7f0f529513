#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "svs/mc_scoring.hpp"
#include "svs/synthetic.hpp"

using svs::ClusteringProblem;
using svs::SamplerConfig;
using svs::ScoreTable;

namespace {

svs::WorldConfig mc_world(std::uint64_t seed, int categories = 6) {
  svs::WorldConfig cfg;
  cfg.n_categories = categories;
  cfg.objects_min = 2;
  cfg.objects_max = 2;
  cfg.poses_per_object = 2;
  cfg.views_per_pose_min = 8;
  cfg.views_per_pose_max = 8;
  cfg.feature_dim = 16;
  cfg.noise_scale = 0.3;
  cfg.seed = seed;
  return cfg;
}

svs::CategorySplit all_train_split(const svs::DatasetModel& model) {
  svs::CategorySplit split;
  split.train_categories = model.categories();
  std::sort(split.train_categories.begin(), split.train_categories.end());
  // One nominal test category keeps the split type honest in tests that
  // do not care about held-out data.
  split.test_categories = {};
  return split;
}

std::vector<int> all_categories(const svs::DatasetModel& model) {
  std::vector<int> out;
  for (std::size_t i = 0; i < model.categories().size(); ++i)
    out.push_back(static_cast<int>(i));
  return out;
}

bool tables_identical(const ScoreTable& a, const ScoreTable& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (!(x.id == y.id)) return false;
    if (x.sum_individual_fx != y.sum_individual_fx) return false;
    if (x.sum_global_fx != y.sum_global_fx) return false;
    if (x.n_problems != y.n_problems) return false;
    if (x.scaled != y.scaled) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("mc_scoring") {

TEST_CASE("sample_problem respects structure") {
  auto [model, quality] = svs::generate_world(mc_world(3, 2));
  SamplerConfig cfg;
  cfg.categories_min = 2;
  cfg.categories_max = 2;
  cfg.objects_min = 1;
  cfg.objects_max = 1;

  svs::Rng rng(5);
  const ClusteringProblem p =
      svs::sample_problem(model, all_categories(model), cfg, rng);
  CHECK(p.view_rows.size() == 2);
  CHECK(p.n_categories == 2);
  CHECK(std::set<int>(p.truth.begin(), p.truth.end()).size() == 2);
  for (std::size_t i = 0; i < p.view_rows.size(); ++i)
    CHECK(model.record_category_idx(p.view_rows[i]) == p.truth[i]);

  // At most one view per (object, pose).
  std::set<int> pose_ids;
  for (int row : p.view_rows)
    CHECK(pose_ids.insert(model.pose_of_row(row)).second);

  // Determinism: same seed, same sequence.
  svs::Rng r1(77), r2(77);
  for (int i = 0; i < 20; ++i) {
    const auto a = svs::sample_problem(model, all_categories(model), cfg, r1);
    const auto b = svs::sample_problem(model, all_categories(model), cfg, r2);
    CHECK(a.view_rows == b.view_rows);
  }

  // Too few categories.
  svs::Rng r3(1);
  CHECK_THROWS_AS(
      (void)svs::sample_problem(model, {0}, cfg, r3), svs::SvsError);
}

TEST_CASE("category count distribution is uniform") {
  auto [model, quality] = svs::generate_world(mc_world(1, 24));
  SamplerConfig cfg;
  cfg.categories_min = 2;
  cfg.categories_max = 10;

  const int n_samples = 100000;
  std::vector<int> histogram(11, 0);
  svs::Rng rng(2718);
  for (int i = 0; i < n_samples; ++i) {
    const auto p = svs::sample_problem(model, all_categories(model), cfg, rng);
    ++histogram[static_cast<std::size_t>(p.n_categories)];
  }

  const int bins = 9;  // 2..10
  const double expected = static_cast<double>(n_samples) / bins;
  const double p = 1.0 / bins;
  const double sigma = std::sqrt(n_samples * p * (1.0 - p));
  double chi2 = 0.0;
  for (int k = 2; k <= 10; ++k) {
    const double diff = histogram[static_cast<std::size_t>(k)] - expected;
    CHECK(std::abs(diff) <= 3.0 * sigma);
    chi2 += diff * diff / expected;
  }
  CHECK(chi2 < 26.12);  // chi-square 0.999 quantile at 8 dof
}

TEST_CASE("forced inclusion always contains the view") {
  auto [model, quality] = svs::generate_world(mc_world(4));
  SamplerConfig cfg;
  svs::Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int forced =
        static_cast<int>(rng.below(model.records().size()));
    const auto p = svs::sample_problem_including(
        model, all_categories(model), cfg, rng, forced);
    CHECK(std::find(p.view_rows.begin(), p.view_rows.end(), forced) !=
          p.view_rows.end());
    CHECK(p.n_categories >= 2);
    std::set<int> pose_ids;
    for (int row : p.view_rows)
      CHECK(pose_ids.insert(model.pose_of_row(row)).second);
  }
}

TEST_CASE("perfect world scores 1.0 everywhere") {
  svs::WorldConfig wc = mc_world(5, 4);
  wc.quality_hi = wc.quality_lo = 1.0;
  wc.quality_jitter = 0.0;
  wc.object_spread = 0.0;
  wc.pose_spread = 0.0;
  wc.noise_scale = 0.0;
  auto [model, quality] = svs::generate_world(wc);

  SamplerConfig cfg;
  cfg.n_problems = 200;
  cfg.min_coverage = 50;
  cfg.seed = 31;
  cfg.objects_min = 2;  // keeps every truth class non-singleton
  const ScoreTable table = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, cfg);
  for (const auto& entry : table.entries) {
    CHECK(entry.n_problems >= 50);
    CHECK(entry.s_hat() == 1.0);
    CHECK(entry.S_hat() == 1.0);
  }
}

TEST_CASE("coverage floor is reached") {
  auto [model, quality] = svs::generate_world(mc_world(6));
  SamplerConfig cfg;
  cfg.n_problems = 200;  // far below what coverage needs
  cfg.min_coverage = 300;
  cfg.seed = 8;
  const ScoreTable table = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, cfg);
  for (const auto& entry : table.entries) {
    CHECK(entry.n_problems >= 300);
    CHECK(entry.s_hat() >= 0.0);
    CHECK(entry.s_hat() <= 1.0);
    CHECK(entry.S_hat() >= 0.0);
    CHECK(entry.S_hat() <= 1.0);
  }
}

TEST_CASE("deterministic and thread-count independent") {
  auto [model, quality] = svs::generate_world(mc_world(7));
  SamplerConfig cfg;
  cfg.n_problems = 400;
  cfg.min_coverage = 100;
  cfg.seed = 99;
  cfg.threads = 1;
  const ScoreTable a = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, cfg);
  const ScoreTable b = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, cfg);
  CHECK(tables_identical(a, b));

  // Fixed-point accumulation makes the sums exact, so even the thread
  // count cannot move them.
  cfg.threads = 3;
  const ScoreTable c = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, cfg);
  CHECK(tables_identical(a, c));
}

TEST_CASE("split runs merge exactly into the full run") {
  auto [model, quality] = svs::generate_world(mc_world(8));
  SamplerConfig full;
  full.n_problems = 600;
  full.min_coverage = 0;
  full.seed = 4242;
  const ScoreTable whole = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, full);

  SamplerConfig first = full;
  first.n_problems = 250;
  SamplerConfig second = full;
  second.n_problems = 350;
  second.problem_index_offset = 250;
  const ScoreTable t1 = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, first);
  const ScoreTable t2 = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, second);
  const ScoreTable merged = svs::merge_scores(t1, t2);
  CHECK(tables_identical(whole, merged));

  // Disjoint seeds simply add as accumulators.
  SamplerConfig other = full;
  other.seed = 777;
  const ScoreTable t3 = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, other);
  const ScoreTable sum = svs::merge_scores(whole, t3);
  for (std::size_t i = 0; i < sum.entries.size(); ++i) {
    CHECK(sum.entries[i].sum_individual_fx ==
          whole.entries[i].sum_individual_fx + t3.entries[i].sum_individual_fx);
    CHECK(sum.entries[i].n_problems ==
          whole.entries[i].n_problems + t3.entries[i].n_problems);
  }
}

TEST_CASE("rescale per pose") {
  ScoreTable table;
  const auto entry = [](const char* cat, int pose, double s_hat,
                        std::uint64_t n) {
    ScoreTable::Entry e;
    e.id.category = cat;
    e.id.object_index = 0;
    e.id.pose_index = pose;
    e.id.view_index = 0;
    e.sum_individual_fx = svs::ScoreFixed::quantize(s_hat * n);
    e.n_problems = n;
    return e;
  };
  // Pose 0: s_hat {0.2, 0.6, 0.8}; pose 1: identical scores.
  auto e0 = entry("cup", 0, 0.2, 1000);
  auto e1 = entry("cup", 0, 0.6, 1000);
  e1.id.view_index = 1;
  auto e2 = entry("cup", 0, 0.8, 1000);
  e2.id.view_index = 2;
  auto e3 = entry("cup", 1, 0.5, 1000);
  auto e4 = entry("cup", 1, 0.5, 1000);
  e4.id.view_index = 1;
  table.entries = {e0, e1, e2, e3, e4};

  svs::rescale_per_pose(table);
  CHECK(table.entries[0].scaled == doctest::Approx(0.0));
  CHECK(table.entries[1].scaled == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(table.entries[2].scaled == doctest::Approx(1.0));
  CHECK(table.entries[3].scaled == 0.5);
  CHECK(table.entries[4].scaled == 0.5);

  // Idempotent: scaled values derive from s_hat, never from themselves.
  ScoreTable again = table;
  svs::rescale_per_pose(again);
  for (std::size_t i = 0; i < table.entries.size(); ++i)
    CHECK(again.entries[i].scaled == table.entries[i].scaled);
}

TEST_CASE("score file round-trip and errors") {
  testutil::TempDir dir;
  auto [model, quality] = svs::generate_world(mc_world(10, 3));
  SamplerConfig cfg;
  cfg.n_problems = 100;
  cfg.min_coverage = 40;
  cfg.seed = 3;
  ScoreTable table = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, cfg);
  svs::rescale_per_pose(table);

  const auto path = dir.file("scores.svss");
  svs::save_scores(table, path, 0x1234);
  const ScoreTable loaded = svs::load_scores(path);
  CHECK(tables_identical(table, loaded));

  // Truncated file.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const auto cut = dir.file("cut.svss");
  std::ofstream(cut, std::ios::binary)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  CHECK_THROWS_AS((void)svs::load_scores(cut), svs::SvsError);

  // Version mismatch.
  const auto versioned = dir.file("v2.svss");
  std::string mutated = bytes;
  mutated[4] = 2;  // bump the little-endian version field
  std::ofstream(versioned, std::ios::binary)
      .write(mutated.data(), static_cast<std::streamsize>(mutated.size()));
  try {
    (void)svs::load_scores(versioned);
    FAIL("expected version mismatch");
  } catch (const svs::SvsError& e) {
    CHECK(e.code() == svs::ErrorCode::VersionMismatch);
  }
}

TEST_CASE("estimator noise shrinks like the square root of coverage") {
  auto [model, quality] = svs::generate_world(mc_world(12, 5));
  const int n_seeds = 6;
  const int n_probe = 24;

  const auto stds_at = [&](std::uint64_t coverage) {
    std::vector<std::vector<double>> s_hats(
        static_cast<std::size_t>(n_seeds));
    for (int s = 0; s < n_seeds; ++s) {
      SamplerConfig cfg;
      cfg.n_problems = 0;  // coverage-driven only
      cfg.min_coverage = coverage;
      cfg.seed = 1000 + static_cast<std::uint64_t>(s);
      const ScoreTable t = svs::accumulate_scores(
          model, all_train_split(model), svs::PipelineConfig{}, cfg);
      for (int v = 0; v < n_probe; ++v)
        s_hats[static_cast<std::size_t>(s)].push_back(
            t.entries[static_cast<std::size_t>(v * 7)].s_hat());
    }
    std::vector<double> stds;
    for (int v = 0; v < n_probe; ++v) {
      double mean = 0.0;
      for (int s = 0; s < n_seeds; ++s)
        mean += s_hats[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)];
      mean /= n_seeds;
      double var = 0.0;
      for (int s = 0; s < n_seeds; ++s) {
        const double d =
            s_hats[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)] -
            mean;
        var += d * d;
      }
      stds.push_back(std::sqrt(var / (n_seeds - 1)));
    }
    double sum = 0.0;
    for (double v : stds) sum += v;
    return sum / stds.size();
  };

  const double wide = stds_at(80);
  const double tight = stds_at(320);
  CHECK(tight > 0.0);
  const double ratio = wide / tight;  // theoretical value 2.0
  CHECK(ratio > 1.3);
  CHECK(ratio < 3.1);
}

TEST_CASE("quality ordering is recovered within poses") {
  svs::WorldConfig wc = mc_world(14, 8);
  wc.quality_model = svs::QualityModel::RandomUniform;
  auto [model, quality] = svs::generate_world(wc);

  SamplerConfig cfg;
  cfg.n_problems = 0;
  cfg.min_coverage = 400;
  cfg.seed = 5;
  cfg.threads = 2;
  const ScoreTable table = svs::accumulate_scores(
      model, all_train_split(model), svs::PipelineConfig{}, cfg);

  std::vector<int> row_of_entry;
  for (const auto& e : table.entries)
    row_of_entry.push_back(model.find_row(e.id));

  double spearman_sum = 0.0;
  int poses = 0;
  std::size_t start = 0;
  while (start < table.entries.size()) {
    std::size_t end = start;
    const auto& first = table.entries[start].id;
    while (end < table.entries.size() &&
           table.entries[end].id.category == first.category &&
           table.entries[end].id.object_index == first.object_index &&
           table.entries[end].id.pose_index == first.pose_index)
      ++end;
    std::vector<double> qs, ss;
    for (std::size_t i = start; i < end; ++i) {
      qs.push_back(quality.at_row(row_of_entry[i]));
      ss.push_back(table.entries[i].s_hat());
    }
    spearman_sum += testutil::spearman(qs, ss);
    ++poses;
    start = end;
  }
  CHECK(spearman_sum / poses >= 0.7);
}

TEST_CASE("insufficient categories rejected") {
  auto [model, quality] = svs::generate_world(mc_world(15, 3));
  svs::CategorySplit split;
  split.train_categories = {model.categories()[0]};
  split.test_categories = {model.categories()[1], model.categories()[2]};
  SamplerConfig cfg;
  try {
    (void)svs::accumulate_scores(model, split, svs::PipelineConfig{}, cfg);
    FAIL("expected insufficient categories");
  } catch (const svs::SvsError& e) {
    CHECK(e.code() == svs::ErrorCode::InsufficientCategories);
  }
}

}  // TEST_SUITE
