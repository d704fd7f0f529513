// svs — semantic view selection workbench.
//
// Subcommands: gen (synthetic world), score (Monte-Carlo view scores),
// train (score regressor), eval (view-selector comparison), grid (camera
// pose lattice). Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime
// error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svs/dataset.hpp"
#include "svs/geometry.hpp"
#include "svs/mc_scoring.hpp"
#include "svs/regressor.hpp"
#include "svs/rng.hpp"
#include "svs/selectors.hpp"
#include "svs/synthetic.hpp"

namespace {

// Canonical key=value dump hashed into every output file, so a result can
// be traced back to the exact configuration that produced it.
class ConfigDigest {
 public:
  template <typename T>
  void add(const std::string& key, const T& value) {
    std::ostringstream os;
    os.precision(17);
    os << key << '=' << value << '\n';
    text_ += os.str();
  }

  std::uint64_t value() const { return svs::fnv1a64(text_); }

 private:
  std::string text_;
};

int exit_code_for(const svs::SvsError& err) {
  switch (err.code()) {
    case svs::ErrorCode::InvalidArgument:
    case svs::ErrorCode::MissingInput:
    case svs::ErrorCode::InsufficientCategories:
      return 2;
    case svs::ErrorCode::IoFailure:
    case svs::ErrorCode::MalformedHeader:
    case svs::ErrorCode::VersionMismatch:
    case svs::ErrorCode::ChecksumMismatch:
    case svs::ErrorCode::DimensionMismatch:
    case svs::ErrorCode::DuplicateView:
    case svs::ErrorCode::MissingTopView:
    case svs::ErrorCode::ModelInvariant:
    case svs::ErrorCode::LengthMismatch:
      return 3;
    default:
      return 4;
  }
}

struct GenArgs {
  std::string out;
  std::string quality_out;
  std::uint64_t seed = 0;
  bool paper_shape = false;
  svs::WorldConfig world;
  std::string quality_model = "phi";
};

struct ScoreArgs {
  std::string features;
  std::string out;
  std::uint64_t seed = 0;
  int n_test = 5;
  std::uint64_t split_seed = 0;
  std::string pipeline = "agg_avg";
  svs::SamplerConfig sampler;
};

struct TrainArgs {
  std::string features;
  std::string scores;
  std::string out;
  std::uint64_t seed = 0;
  svs::RegressorConfig reg;
  std::string angle_encoding = "raw";
  int mlp1_width = 256;
  int mlp2_width = 64;
};

struct EvalArgs {
  std::string features;
  std::string scores;
  std::string model;
  std::string out;
  std::string table;
  std::uint64_t seed = 0;
  std::vector<std::string> selectors{"TOP", "RAND"};
  std::vector<std::string> pipelines{"agg_avg", "kmeans", "agg_complete"};
  std::string categories = "train";
  int n_test = 5;
  std::uint64_t split_seed = 0;
  svs::EvalOptions opts;
};

struct GridArgs {
  double length = 0.1, width = 0.1, height = 0.1;
  std::vector<double> gc{0.0, 0.0, 0.0};
  double focal = 500.0;
  int image_width = 640;
  int image_height = 480;
  double fill = 0.7;
  double theta_step = 45.0;
  std::vector<double> phi_values{45.0, 60.0, 75.0};
  std::vector<double> exclude_theta{270.0};
  double radius_override = 0.0;
  std::string out;
};

int run_gen(const GenArgs& args) {
  svs::require(args.out != args.quality_out, svs::ErrorCode::InvalidArgument,
               "--out and --quality-out must differ");

  svs::WorldConfig cfg = args.world;
  cfg.seed = args.seed;
  if (args.quality_model == "phi")
    cfg.quality_model = svs::QualityModel::PhiDependent;
  else if (args.quality_model == "uniform")
    cfg.quality_model = svs::QualityModel::RandomUniform;
  else
    svs::fail(svs::ErrorCode::InvalidArgument,
              "--quality-model must be 'phi' or 'uniform'");

  ConfigDigest digest;
  digest.add("cmd", "gen");
  digest.add("seed", args.seed);
  digest.add("paper_shape", args.paper_shape);
  digest.add("categories", cfg.n_categories);
  digest.add("objects_min", cfg.objects_min);
  digest.add("objects_max", cfg.objects_max);
  digest.add("poses", cfg.poses_per_object);
  digest.add("views_min", cfg.views_per_pose_min);
  digest.add("views_max", cfg.views_per_pose_max);
  digest.add("feature_dim", cfg.feature_dim);
  digest.add("separation", cfg.category_separation);
  digest.add("object_spread", cfg.object_spread);
  digest.add("pose_spread", cfg.pose_spread);
  digest.add("noise", cfg.noise_scale);
  digest.add("quality_model", args.quality_model);
  digest.add("quality_hi", cfg.quality_hi);
  digest.add("quality_lo", cfg.quality_lo);
  digest.add("quality_jitter", cfg.quality_jitter);

  auto [model, quality] = args.paper_shape
                              ? svs::emit_paper_shaped_world(args.seed)
                              : svs::generate_world(cfg);
  svs::save_feature_store(model, args.out);
  svs::save_quality_map(model, quality, args.quality_out, digest.value());
  std::cout << "wrote " << model.records().size() << " views over "
            << model.categories().size() << " categories to " << args.out
            << '\n';
  return 0;
}

int run_score(const ScoreArgs& args) {
  const svs::DatasetModel model = svs::load_feature_store(args.features);
  const svs::CategorySplit split =
      svs::split_categories(model, args.n_test, args.split_seed);
  const svs::PipelineConfig pipeline =
      svs::pipeline_from_name(args.pipeline, args.seed);

  svs::SamplerConfig sampler = args.sampler;
  sampler.seed = args.seed;

  ConfigDigest digest;
  digest.add("cmd", "score");
  digest.add("features", args.features);
  digest.add("seed", args.seed);
  digest.add("n_test", args.n_test);
  digest.add("split_seed", args.split_seed);
  digest.add("pipeline", args.pipeline);
  digest.add("n_problems", sampler.n_problems);
  digest.add("min_coverage", sampler.min_coverage);
  digest.add("categories_min", sampler.categories_min);
  digest.add("categories_max", sampler.categories_max);
  digest.add("objects_min", sampler.objects_min);
  digest.add("objects_max", sampler.objects_max);
  digest.add("offset", sampler.problem_index_offset);

  svs::ScoreTable table = svs::accumulate_scores(model, split, pipeline,
                                                 sampler);
  svs::rescale_per_pose(table);
  svs::save_scores(table, args.out, digest.value());
  std::cout << "scored " << table.entries.size() << " train views to "
            << args.out << '\n';
  return 0;
}

int run_train(const TrainArgs& args) {
  const svs::DatasetModel model = svs::load_feature_store(args.features);
  const svs::ScoreTable table = svs::load_scores(args.scores);

  svs::RegressorConfig cfg = args.reg;
  cfg.embed_dim = model.feature_dim();
  cfg.seed = args.seed;
  cfg.mlp1_widths = {args.mlp1_width, args.mlp1_width};
  cfg.mlp2_widths = {args.mlp2_width, args.mlp2_width, args.mlp2_width};
  if (args.angle_encoding == "raw")
    cfg.angle_encoding = svs::AngleEncoding::Raw;
  else if (args.angle_encoding == "sincos")
    cfg.angle_encoding = svs::AngleEncoding::SinCos;
  else
    svs::fail(svs::ErrorCode::InvalidArgument,
              "--angle-encoding must be 'raw' or 'sincos'");

  ConfigDigest digest;
  digest.add("cmd", "train");
  digest.add("features", args.features);
  digest.add("scores", args.scores);
  digest.add("seed", args.seed);
  digest.add("epochs", cfg.epochs);
  digest.add("batch", cfg.batch_size);
  digest.add("lr", cfg.learning_rate);
  digest.add("dropout", cfg.dropout);
  digest.add("mlp1", args.mlp1_width);
  digest.add("mlp2", args.mlp2_width);
  digest.add("angles", args.angle_encoding);

  const std::vector<svs::TrainingExample> dataset =
      svs::build_training_set(model, table);
  svs::TrainResult result = svs::train(dataset, cfg);
  svs::save_model(result.state, args.out, digest.value());

  std::cout << "trained on " << dataset.size() << " examples, final loss "
            << (result.loss_history.empty() ? 0.0
                                            : result.loss_history.back())
            << ", model written to " << args.out << '\n';
  return 0;
}

int run_eval(const EvalArgs& args) {
  svs::require(args.table.empty() || args.table != args.out,
               svs::ErrorCode::InvalidArgument,
               "--out and --table must differ");
  const svs::DatasetModel model = svs::load_feature_store(args.features);

  std::vector<std::string> category_set;
  if (args.categories == "all") {
    category_set = model.categories();
  } else {
    const svs::CategorySplit split =
        svs::split_categories(model, args.n_test, args.split_seed);
    if (args.categories == "train")
      category_set = split.train_categories;
    else if (args.categories == "test")
      category_set = split.test_categories;
    else
      svs::fail(svs::ErrorCode::InvalidArgument,
                "--categories must be train, test or all");
  }

  std::vector<svs::SelectorId> selectors;
  for (const std::string& name : args.selectors)
    selectors.push_back(svs::selector_from_name(name));
  std::vector<svs::PipelineConfig> pipelines;
  for (const std::string& name : args.pipelines)
    pipelines.push_back(svs::pipeline_from_name(name, args.seed));

  std::optional<svs::ScoreTable> scores;
  if (!args.scores.empty()) scores = svs::load_scores(args.scores);
  std::optional<svs::RegressorState> regressor;
  if (!args.model.empty()) regressor = svs::load_model(args.model);

  svs::EvalOptions opts = args.opts;
  opts.seed = args.seed;

  ConfigDigest digest;
  digest.add("cmd", "eval");
  digest.add("features", args.features);
  digest.add("seed", args.seed);
  digest.add("categories", args.categories);
  digest.add("n_test", args.n_test);
  digest.add("split_seed", args.split_seed);
  digest.add("n_problems", opts.n_problems);
  for (const std::string& s : args.selectors) digest.add("selector", s);
  for (const std::string& p : args.pipelines) digest.add("pipeline", p);

  svs::EvalReport report = svs::evaluate(
      model, category_set, selectors, pipelines, opts,
      scores ? &*scores : nullptr, regressor ? &*regressor : nullptr);
  report.config_digest = digest.value();

  std::optional<std::filesystem::path> table_path;
  if (!args.table.empty()) table_path = args.table;
  svs::report_render(report, args.out, table_path);
  std::cout << "evaluated " << selectors.size() << " selectors x "
            << pipelines.size() << " pipelines over " << opts.n_problems
            << " problems; report at " << args.out << '\n';
  return 0;
}

int run_grid(const GridArgs& args) {
  svs::ObjectGeometry geom;
  geom.gc = Eigen::Vector3d(args.gc[0], args.gc[1], args.gc[2]);
  geom.length = args.length;
  geom.width = args.width;
  geom.height = args.height;
  svs::CameraIntrinsics intr{args.focal, args.image_width, args.image_height};

  const double radius = args.radius_override > 0.0
                            ? args.radius_override
                            : svs::compute_radius(geom, intr, args.fill);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.out.empty()) {
    file.open(args.out);
    svs::require(file.good(), svs::ErrorCode::IoFailure,
                 "cannot open " + args.out);
    out = &file;
  }

  (*out) << "# theta,phi,x,y,z,qw,qx,qy,qz  radius=" << radius << '\n';
  out->precision(12);
  for (const svs::GridAngle& angle :
       svs::pose_grid(args.theta_step, args.phi_values, args.exclude_theta)) {
    const svs::CameraPose pose =
        svs::pose_to_transform(geom, angle.theta, angle.phi, radius);
    const Eigen::Quaterniond q(pose.rotation);
    (*out) << angle.theta << ',' << angle.phi << ',' << pose.position.x()
           << ',' << pose.position.y() << ',' << pose.position.z() << ','
           << q.w() << ',' << q.x() << ',' << q.y() << ',' << q.z() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic view selection workbench"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a config file");

  GenArgs gen;
  CLI::App* cgen = app.add_subcommand("gen", "generate a synthetic world");
  cgen->add_option("--out", gen.out, "feature store output")->required();
  cgen->add_option("--quality-out", gen.quality_out,
                   "quality sidecar output")->required();
  cgen->add_option("--seed", gen.seed, "master seed")->required();
  cgen->add_flag("--paper-shape", gen.paper_shape,
                 "reference dataset shape (29 cats, 4-6 objects, 17-21 views)");
  cgen->add_option("--categories", gen.world.n_categories);
  cgen->add_option("--objects-min", gen.world.objects_min);
  cgen->add_option("--objects-max", gen.world.objects_max);
  cgen->add_option("--poses", gen.world.poses_per_object);
  cgen->add_option("--views-min", gen.world.views_per_pose_min);
  cgen->add_option("--views-max", gen.world.views_per_pose_max);
  cgen->add_option("--feature-dim", gen.world.feature_dim);
  cgen->add_option("--separation", gen.world.category_separation);
  cgen->add_option("--object-spread", gen.world.object_spread);
  cgen->add_option("--pose-spread", gen.world.pose_spread);
  cgen->add_option("--noise", gen.world.noise_scale);
  cgen->add_option("--quality-model", gen.quality_model, "phi | uniform");
  cgen->add_option("--quality-hi", gen.world.quality_hi);
  cgen->add_option("--quality-lo", gen.world.quality_lo);
  cgen->add_option("--quality-jitter", gen.world.quality_jitter);

  ScoreArgs score;
  CLI::App* cscore =
      app.add_subcommand("score", "Monte-Carlo semantic view scores");
  cscore->add_option("--features", score.features, "feature store")->required();
  cscore->add_option("--out", score.out, "score file output")->required();
  cscore->add_option("--seed", score.seed, "master seed")->required();
  cscore->add_option("--n-test", score.n_test, "held-out category count");
  cscore->add_option("--split-seed", score.split_seed);
  cscore->add_option("--pipeline", score.pipeline,
                     "agg_avg | agg_ward | agg_complete | kmeans");
  cscore->add_option("--n-problems", score.sampler.n_problems,
                     "problems before coverage repair");
  cscore->add_option("--min-coverage", score.sampler.min_coverage);
  cscore->add_option("--categories-min", score.sampler.categories_min);
  cscore->add_option("--categories-max", score.sampler.categories_max);
  cscore->add_option("--objects-min", score.sampler.objects_min);
  cscore->add_option("--objects-max", score.sampler.objects_max);
  cscore->add_option("--offset", score.sampler.problem_index_offset,
                     "problem index offset for split runs");
  cscore->add_option("--threads", score.sampler.threads);
  cscore->add_option("--progress", score.sampler.progress_every,
                     "emit a coverage audit every N problems");

  TrainArgs train;
  CLI::App* ctrain = app.add_subcommand("train", "train the score regressor");
  ctrain->add_option("--features", train.features)->required();
  ctrain->add_option("--scores", train.scores)->required();
  ctrain->add_option("--out", train.out, "model file output")->required();
  ctrain->add_option("--seed", train.seed, "master seed")->required();
  ctrain->add_option("--epochs", train.reg.epochs);
  ctrain->add_option("--batch", train.reg.batch_size);
  ctrain->add_option("--lr", train.reg.learning_rate);
  ctrain->add_option("--dropout", train.reg.dropout);
  ctrain->add_option("--mlp1-width", train.mlp1_width);
  ctrain->add_option("--mlp2-width", train.mlp2_width);
  ctrain->add_option("--angle-encoding", train.angle_encoding,
                     "raw | sincos");

  EvalArgs eval;
  CLI::App* ceval = app.add_subcommand("eval", "compare view selectors");
  ceval->add_option("--features", eval.features)->required();
  ceval->add_option("--out", eval.out, "report json output")->required();
  ceval->add_option("--table", eval.table, "plain-text table output");
  ceval->add_option("--seed", eval.seed, "master seed")->required();
  ceval->add_option("--selectors", eval.selectors,
                    "TOP RAND OPT_IND OPT_GLOB MODEL");
  ceval->add_option("--pipelines", eval.pipelines);
  ceval->add_option("--scores", eval.scores, "score file (OPT selectors)");
  ceval->add_option("--model", eval.model, "model file (MODEL selector)");
  ceval->add_option("--categories", eval.categories, "train | test | all");
  ceval->add_option("--n-test", eval.n_test);
  ceval->add_option("--split-seed", eval.split_seed);
  ceval->add_option("--n-problems", eval.opts.n_problems);
  ceval->add_option("--categories-min", eval.opts.categories_min);
  ceval->add_option("--categories-max", eval.opts.categories_max);
  ceval->add_option("--objects-min", eval.opts.objects_min);
  ceval->add_option("--objects-max", eval.opts.objects_max);
  ceval->add_option("--threads", eval.opts.threads);
  ceval->add_option("--exclude-theta", eval.opts.excluded_thetas,
                    "unreachable theta values");

  GridArgs grid;
  CLI::App* cgrid = app.add_subcommand("grid", "emit the camera pose grid");
  cgrid->add_option("--length", grid.length)->required();
  cgrid->add_option("--width", grid.width)->required();
  cgrid->add_option("--height", grid.height)->required();
  cgrid->add_option("--gc", grid.gc)->expected(3);
  cgrid->add_option("--focal", grid.focal);
  cgrid->add_option("--image-width", grid.image_width);
  cgrid->add_option("--image-height", grid.image_height);
  cgrid->add_option("--fill", grid.fill);
  cgrid->add_option("--theta-step", grid.theta_step);
  cgrid->add_option("--phi", grid.phi_values);
  cgrid->add_option("--exclude-theta", grid.exclude_theta);
  cgrid->add_option("--radius", grid.radius_override,
                    "override the computed radius");
  cgrid->add_option("--out", grid.out, "write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (cgen->parsed()) return run_gen(gen);
    if (cscore->parsed()) return run_score(score);
    if (ctrain->parsed()) return run_train(train);
    if (ceval->parsed()) return run_eval(eval);
    if (cgrid->parsed()) return run_grid(grid);
  } catch (const svs::SvsError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 2;
}
