#include "svs/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "svs/metrics.hpp"

namespace svs {

std::string SelectorId::name() const {
  switch (kind) {
    case SelectorKind::Top: return "TOP";
    case SelectorKind::Rand: return "RAND";
    case SelectorKind::OptInd: return "OPT_IND";
    case SelectorKind::OptGlob: return "OPT_GLOB";
    case SelectorKind::Model: return "MODEL";
  }
  return "?";
}

SelectorId selector_from_name(const std::string& name) {
  SelectorId id;
  if (name == "TOP") id.kind = SelectorKind::Top;
  else if (name == "RAND") id.kind = SelectorKind::Rand;
  else if (name == "OPT_IND") id.kind = SelectorKind::OptInd;
  else if (name == "OPT_GLOB") id.kind = SelectorKind::OptGlob;
  else if (name == "MODEL") id.kind = SelectorKind::Model;
  else fail(ErrorCode::InvalidArgument, "unknown selector '" + name + "'");
  return id;
}

namespace {

// Smallest (theta, phi) wins score ties, for reproducible argmax.
bool better_choice(double score, double best_score, const ViewRecord& v,
                   const ViewRecord& best) {
  if (score != best_score) return score > best_score;
  if (v.theta != best.theta) return v.theta < best.theta;
  return v.phi < best.phi;
}

}  // namespace

const ViewRecord* select_view(const SelectorId& selector,
                              const std::vector<const ViewRecord*>& pose_views,
                              const ScoreTable* scores,
                              const RegressorState* model,
                              std::span<const float> top_embedding, Rng& rng) {
  require(!pose_views.empty(), ErrorCode::InvalidArgument,
          "select_view: empty pose");

  switch (selector.kind) {
    case SelectorKind::Top: {
      for (const ViewRecord* v : pose_views)
        if (v->is_top) return v;
      fail(ErrorCode::MissingTopView, "pose has no top view");
    }
    case SelectorKind::Rand:
      return pose_views[rng.below(pose_views.size())];
    case SelectorKind::OptInd:
    case SelectorKind::OptGlob: {
      require(scores != nullptr, ErrorCode::MissingInput,
              "OPT selectors need a score table");
      const ViewRecord* best = nullptr;
      double best_score = 0.0;
      for (const ViewRecord* v : pose_views) {
        const int e = scores->find(v->id);
        require(e >= 0, ErrorCode::MissingInput,
                "score table does not cover a candidate view");
        const auto& entry = scores->entries[static_cast<std::size_t>(e)];
        const double s = selector.kind == SelectorKind::OptInd
                             ? entry.s_hat()
                             : entry.S_hat();
        if (!best || better_choice(s, best_score, *v, *best)) {
          best = v;
          best_score = s;
        }
      }
      return best;
    }
    case SelectorKind::Model: {
      require(model != nullptr, ErrorCode::MissingInput,
              "MODEL selector needs a trained regressor");
      require(!top_embedding.empty(), ErrorCode::MissingInput,
              "MODEL selector needs the pose's top-view embedding");
      const ViewRecord* best = nullptr;
      double best_score = 0.0;
      for (const ViewRecord* v : pose_views) {
        const double s =
            forward(*model, top_embedding, v->theta, v->phi, ForwardMode::Eval);
        if (!best || better_choice(s, best_score, *v, *best)) {
          best = v;
          best_score = s;
        }
      }
      return best;
    }
  }
  fail(ErrorCode::InvalidArgument, "unreachable selector kind");
}

namespace {

struct EvalProblem {
  std::vector<int> pose_ids;
  std::vector<int> truth;
  int n_categories = 0;
};

EvalProblem sample_eval_problem(const DatasetModel& model,
                                const std::vector<int>& allowed,
                                const EvalOptions& opts, Rng& rng) {
  EvalProblem p;
  const int avail = static_cast<int>(allowed.size());
  const int lo = std::min(opts.categories_min, avail);
  const int hi = std::min(opts.categories_max, avail);
  const int n_cat = static_cast<int>(rng.uniform_int(lo, hi));
  p.n_categories = n_cat;
  for (std::uint32_t pick : rng.choose(static_cast<std::uint32_t>(avail),
                                       static_cast<std::uint32_t>(n_cat))) {
    const int cat = allowed[pick];
    const auto& objects = model.objects_by_category()[cat];
    const int olo = std::min(opts.objects_min, static_cast<int>(objects.size()));
    const int ohi = std::min(opts.objects_max, static_cast<int>(objects.size()));
    const int n_obj = static_cast<int>(rng.uniform_int(olo, ohi));
    for (std::uint32_t oi :
         rng.choose(static_cast<std::uint32_t>(objects.size()),
                    static_cast<std::uint32_t>(n_obj))) {
      const auto& poses = model.poses_of_object(cat, objects[oi]);
      p.pose_ids.push_back(poses[rng.below(poses.size())]);
      p.truth.push_back(cat);
    }
  }
  return p;
}

struct MetricSums {
  ScoreFixed fm, nmi, pur;

  void merge(const MetricSums& other) {
    fm.add_raw(other.fm.raw());
    nmi.add_raw(other.nmi.raw());
    pur.add_raw(other.pur.raw());
  }
};

}  // namespace

EvalReport evaluate(const DatasetModel& model,
                    const std::vector<std::string>& categories,
                    const std::vector<SelectorId>& selectors,
                    const std::vector<PipelineConfig>& pipelines,
                    const EvalOptions& opts, const ScoreTable* scores,
                    const RegressorState* regressor) {
  require(!selectors.empty(), ErrorCode::InvalidArgument,
          "no selectors to evaluate");
  require(!pipelines.empty(), ErrorCode::InvalidArgument,
          "no pipelines to evaluate");
  require(opts.n_problems >= 1, ErrorCode::InvalidArgument,
          "n_problems must be >= 1");

  std::vector<int> allowed;
  for (const std::string& name : categories) {
    const int idx = model.category_index(name);
    require(idx >= 0, ErrorCode::InvalidArgument,
            "category '" + name + "' not in the dataset");
    allowed.push_back(idx);
  }
  std::sort(allowed.begin(), allowed.end());
  require(static_cast<int>(allowed.size()) >= 2,
          ErrorCode::InsufficientCategories,
          "evaluation needs at least two categories");

  bool needs_model = false, needs_scores = false;
  for (const SelectorId& sel : selectors) {
    needs_model |= sel.kind == SelectorKind::Model;
    needs_scores |=
        sel.kind == SelectorKind::OptInd || sel.kind == SelectorKind::OptGlob;
  }
  require(!needs_scores || scores != nullptr, ErrorCode::MissingInput,
          "OPT selectors need a score table");
  require(!needs_model || regressor != nullptr, ErrorCode::MissingInput,
          "MODEL selector needs a trained regressor");
  if (needs_model)
    require(regressor->config.embed_dim == model.feature_dim(),
            ErrorCode::DimensionMismatch,
            "regressor embed_dim does not match the feature store");

  // Candidate views per pose after the reachability mask.
  const auto& poses = model.poses();
  std::vector<std::vector<int>> candidates(poses.size());
  for (std::size_t pid = 0; pid < poses.size(); ++pid) {
    for (int row : poses[pid].view_rows) {
      const double theta = model.records()[static_cast<std::size_t>(row)].theta;
      bool masked = false;
      for (double ex : opts.excluded_thetas)
        if (std::abs(theta - ex) < 1e-9) masked = true;
      if (!masked) candidates[pid].push_back(row);
    }
    if (candidates[pid].empty())
      candidates[pid].push_back(poses[pid].top_row);  // observation fallback
  }

  // Row lookup into the score table.
  std::vector<int> row_to_entry;
  if (scores) {
    row_to_entry.assign(model.records().size(), -1);
    for (std::size_t e = 0; e < scores->entries.size(); ++e) {
      const int row = model.find_row(scores->entries[e].id);
      if (row >= 0) row_to_entry[static_cast<std::size_t>(row)] =
          static_cast<int>(e);
    }
  }

  // Fixed per-pose choices for every selector except RAND.
  const auto pose_in_scope = [&](const PoseRef& pose) {
    return std::binary_search(allowed.begin(), allowed.end(),
                              pose.category_idx);
  };
  std::vector<std::vector<int>> fixed_choice(
      selectors.size(), std::vector<int>(poses.size(), -1));
  for (std::size_t s = 0; s < selectors.size(); ++s) {
    const SelectorId& sel = selectors[s];
    if (sel.kind == SelectorKind::Rand) continue;
    for (std::size_t pid = 0; pid < poses.size(); ++pid) {
      if (!pose_in_scope(poses[pid])) continue;
      switch (sel.kind) {
        case SelectorKind::Top:
          fixed_choice[s][pid] = poses[pid].top_row;
          break;
        case SelectorKind::OptInd:
        case SelectorKind::OptGlob: {
          int best_row = -1;
          double best_score = 0.0;
          for (int row : candidates[pid]) {
            const int e = row_to_entry[static_cast<std::size_t>(row)];
            require(e >= 0, ErrorCode::MissingInput,
                    "score table does not cover an evaluated view");
            const auto& entry = scores->entries[static_cast<std::size_t>(e)];
            const double score = sel.kind == SelectorKind::OptInd
                                     ? entry.s_hat()
                                     : entry.S_hat();
            const auto& rec = model.records()[static_cast<std::size_t>(row)];
            if (best_row < 0 ||
                better_choice(score, best_score, rec,
                              model.records()[static_cast<std::size_t>(
                                  best_row)])) {
              best_row = row;
              best_score = score;
            }
          }
          fixed_choice[s][pid] = best_row;
          break;
        }
        case SelectorKind::Model: {
          const auto& top =
              model.records()[static_cast<std::size_t>(poses[pid].top_row)];
          int best_row = -1;
          double best_score = 0.0;
          for (int row : candidates[pid]) {
            const auto& rec = model.records()[static_cast<std::size_t>(row)];
            const double score = forward(*regressor, top.features, rec.theta,
                                         rec.phi, ForwardMode::Eval);
            if (best_row < 0 ||
                better_choice(score, best_score, rec,
                              model.records()[static_cast<std::size_t>(
                                  best_row)])) {
              best_row = row;
              best_score = score;
            }
          }
          fixed_choice[s][pid] = best_row;
          break;
        }
        default:
          break;
      }
    }
  }

  const std::size_t n_cells = pipelines.size() * selectors.size();
  std::vector<MetricSums> sums(n_cells);

  if (opts.per_problem_fm)
    opts.per_problem_fm->assign(
        selectors.size(), std::vector<double>(opts.n_problems, 0.0));

  const int n_threads = static_cast<int>(std::min<std::uint64_t>(
      std::max(1, opts.threads), opts.n_problems));
  std::vector<std::vector<MetricSums>> parts(
      static_cast<std::size_t>(n_threads),
      std::vector<MetricSums>(n_cells));

  auto worker = [&](int t) {
    const std::uint64_t begin = opts.n_problems * t / n_threads;
    const std::uint64_t end = opts.n_problems * (t + 1) / n_threads;
    ClusterScratch scratch;
    ClusterScratch pscratch;
    ClusterAssignment assignment;
    PairConfusion conf;
    std::vector<int> chosen;
    const int d = model.feature_dim();

    for (std::uint64_t i = begin; i < end; ++i) {
      Rng prng = Rng::substream(opts.seed, "eval-problem", i);
      const EvalProblem p = sample_eval_problem(model, allowed, opts, prng);
      const int n = static_cast<int>(p.pose_ids.size());

      for (std::size_t s = 0; s < selectors.size(); ++s) {
        chosen.resize(static_cast<std::size_t>(n));
        if (selectors[s].kind == SelectorKind::Rand) {
          Rng rrng = Rng::substream(opts.seed, "eval-rand", i);
          for (int slot = 0; slot < n; ++slot) {
            const auto& cand =
                candidates[static_cast<std::size_t>(p.pose_ids[slot])];
            chosen[static_cast<std::size_t>(slot)] =
                cand[rrng.below(cand.size())];
          }
        } else {
          for (int slot = 0; slot < n; ++slot)
            chosen[static_cast<std::size_t>(slot)] =
                fixed_choice[s][static_cast<std::size_t>(p.pose_ids[slot])];
        }

        scratch.points.resize(static_cast<std::size_t>(n) * d);
        for (int r = 0; r < n; ++r) {
          const auto& features =
              model.records()[static_cast<std::size_t>(chosen[r])].features;
          double* row = scratch.points.data() + static_cast<std::size_t>(r) * d;
          for (int j = 0; j < d; ++j) row[j] = static_cast<double>(features[j]);
        }

        for (std::size_t pl = 0; pl < pipelines.size(); ++pl) {
          pscratch.points.assign(scratch.points.begin(),
                                 scratch.points.end());
          cluster_points(n, d, p.n_categories, pipelines[pl], pscratch,
                         assignment);
          pair_confusion(assignment, p.truth, conf);
          MetricSums& cell = parts[t][pl * selectors.size() + s];
          const double fm = fm_global(conf);
          cell.fm.add(fm);
          cell.nmi.add(nmi(assignment, p.truth));
          cell.pur.add(purity(assignment, p.truth));
          if (pl == 0 && opts.per_problem_fm)
            (*opts.per_problem_fm)[s][static_cast<std::size_t>(i)] = fm;
        }
      }
    }
  };

  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& part : parts)
    for (std::size_t c = 0; c < n_cells; ++c) sums[c].merge(part[c]);

  EvalReport report;
  report.seed = opts.seed;
  report.categories_min = opts.categories_min;
  report.categories_max = opts.categories_max;
  report.objects_min = opts.objects_min;
  report.objects_max = opts.objects_max;
  const double denom = static_cast<double>(opts.n_problems);
  for (std::size_t pl = 0; pl < pipelines.size(); ++pl) {
    for (std::size_t s = 0; s < selectors.size(); ++s) {
      const MetricSums& cell = sums[pl * selectors.size() + s];
      EvalRow row;
      row.pipeline = pipelines[pl].name();
      row.selector = selectors[s].name();
      row.mean_fm = cell.fm.value() / denom;
      row.mean_nmi = cell.nmi.value() / denom;
      row.mean_pur = cell.pur.value() / denom;
      row.n_problems = opts.n_problems;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void report_render(const EvalReport& report,
                   const std::filesystem::path& json_path,
                   const std::optional<std::filesystem::path>& table_path) {
  require(!report.rows.empty(), ErrorCode::InvalidArgument,
          "report has no rows");

  nlohmann::json doc;
  doc["schema_version"] = report.schema_version;
  doc["seed"] = report.seed;
  doc["config_digest"] = report.config_digest;
  doc["sampling"] = {{"categories_min", report.categories_min},
                     {"categories_max", report.categories_max},
                     {"objects_min", report.objects_min},
                     {"objects_max", report.objects_max}};
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& row : report.rows) {
    rows.push_back({{"pipeline", row.pipeline},
                    {"selector", row.selector},
                    {"fm", row.mean_fm},
                    {"nmi", row.mean_nmi},
                    {"pur", row.mean_pur},
                    {"n_problems", row.n_problems}});
  }
  doc["rows"] = rows;

  std::ofstream out(json_path);
  require(out.good(), ErrorCode::IoFailure,
          "cannot open " + json_path.string() + " for writing");
  out << doc.dump(2) << '\n';
  require(out.good(), ErrorCode::IoFailure, "write failed");

  if (!table_path) return;
  std::ofstream tab(*table_path);
  require(tab.good(), ErrorCode::IoFailure,
          "cannot open " + table_path->string() + " for writing");
  tab << std::left << std::setw(14) << "pipeline" << std::setw(10)
      << "selector" << std::right << std::setw(8) << "FM" << std::setw(8)
      << "NMI" << std::setw(8) << "PUR" << std::setw(10) << "problems"
      << '\n';
  tab << std::string(58, '-') << '\n';
  tab << std::fixed << std::setprecision(4);
  for (const EvalRow& row : report.rows) {
    tab << std::left << std::setw(14) << row.pipeline << std::setw(10)
        << row.selector << std::right << std::setw(8) << row.mean_fm
        << std::setw(8) << row.mean_nmi << std::setw(8) << row.mean_pur
        << std::setw(10) << row.n_problems << '\n';
  }
  require(tab.good(), ErrorCode::IoFailure, "write failed");
}

EvalReport report_parse(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  require(in.good(), ErrorCode::IoFailure,
          "cannot open " + json_path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader,
         "bad report json: " + std::string(e.what()));
  }
  EvalReport report;
  try {
    report.schema_version = doc.at("schema_version").get<int>();
    require(report.schema_version == 1, ErrorCode::VersionMismatch,
            "unsupported report schema");
    report.seed = doc.at("seed").get<std::uint64_t>();
    report.config_digest = doc.at("config_digest").get<std::uint64_t>();
    const auto& sampling = doc.at("sampling");
    report.categories_min = sampling.at("categories_min").get<int>();
    report.categories_max = sampling.at("categories_max").get<int>();
    report.objects_min = sampling.at("objects_min").get<int>();
    report.objects_max = sampling.at("objects_max").get<int>();
    for (const auto& row : doc.at("rows")) {
      EvalRow r;
      r.pipeline = row.at("pipeline").get<std::string>();
      r.selector = row.at("selector").get<std::string>();
      r.mean_fm = row.at("fm").get<double>();
      r.mean_nmi = row.at("nmi").get<double>();
      r.mean_pur = row.at("pur").get<double>();
      r.n_problems = row.at("n_problems").get<std::uint64_t>();
      report.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader,
         "bad report json: " + std::string(e.what()));
  }
  return report;
}

std::vector<TrainingExample> build_training_set(const DatasetModel& model,
                                                const ScoreTable& table) {
  std::vector<TrainingExample> out;
  out.reserve(table.entries.size());
  for (const auto& entry : table.entries) {
    const int cat = model.category_index(entry.id.category);
    require(cat >= 0, ErrorCode::InvalidArgument,
            "score table category not in the dataset");
    const auto& pose_ids = model.poses_of_object(cat, entry.id.object_index);
    const PoseRef* pose = nullptr;
    for (int pid : pose_ids) {
      const PoseRef& candidate = model.poses()[static_cast<std::size_t>(pid)];
      if (candidate.pose_index == entry.id.pose_index) {
        pose = &candidate;
        break;
      }
    }
    require(pose != nullptr, ErrorCode::InvalidArgument,
            "score table pose not in the dataset");

    TrainingExample ex;
    ex.top_embedding =
        model.records()[static_cast<std::size_t>(pose->top_row)].features;
    ex.theta = entry.theta;
    ex.phi = entry.phi;
    ex.target = entry.scaled;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace svs
