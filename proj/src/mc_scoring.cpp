#include "svs/mc_scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>

#include "svs/binio.hpp"
#include "svs/metrics.hpp"

namespace svs {

int ScoreTable::find(const ViewId& id) const {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].id == id) return static_cast<int>(i);
  return -1;
}

namespace {

int clamped_count(Rng& rng, int lo, int hi, int avail) {
  const int clo = std::min(lo, avail);
  const int chi = std::min(hi, avail);
  return static_cast<int>(rng.uniform_int(clo, chi));
}

void append_object_view(const DatasetModel& model, int category_idx,
                        int object_index, Rng& rng, ClusteringProblem& out) {
  const std::vector<int>& poses = model.poses_of_object(category_idx,
                                                        object_index);
  const PoseRef& pose =
      model.poses()[poses[rng.below(poses.size())]];
  const int row = pose.view_rows[rng.below(pose.view_rows.size())];
  out.view_rows.push_back(row);
  out.truth.push_back(category_idx);
}

}  // namespace

ClusteringProblem sample_problem(const DatasetModel& model,
                                 const std::vector<int>& allowed_categories,
                                 const SamplerConfig& cfg, Rng& rng) {
  const int avail = static_cast<int>(allowed_categories.size());
  require(cfg.categories_min >= 2, ErrorCode::InvalidArgument,
          "categories_min must be >= 2");
  require(avail >= cfg.categories_min, ErrorCode::InsufficientCategories,
          "not enough categories to sample a problem");

  ClusteringProblem out;
  const int n_cat = clamped_count(rng, cfg.categories_min, cfg.categories_max,
                                  avail);
  out.n_categories = n_cat;
  for (std::uint32_t pick : rng.choose(static_cast<std::uint32_t>(avail),
                                       static_cast<std::uint32_t>(n_cat))) {
    const int cat = allowed_categories[pick];
    const auto& objects = model.objects_by_category()[cat];
    const int n_obj = clamped_count(rng, cfg.objects_min, cfg.objects_max,
                                    static_cast<int>(objects.size()));
    for (std::uint32_t oi :
         rng.choose(static_cast<std::uint32_t>(objects.size()),
                    static_cast<std::uint32_t>(n_obj)))
      append_object_view(model, cat, objects[oi], rng, out);
  }
  return out;
}

ClusteringProblem sample_problem_including(
    const DatasetModel& model, const std::vector<int>& allowed_categories,
    const SamplerConfig& cfg, Rng& rng, int forced_row) {
  const int avail = static_cast<int>(allowed_categories.size());
  require(avail >= cfg.categories_min, ErrorCode::InsufficientCategories,
          "not enough categories to sample a problem");

  const int forced_cat = model.record_category_idx(forced_row);
  const int forced_obj = model.records()[forced_row].id.object_index;

  std::vector<int> others;
  others.reserve(allowed_categories.size());
  for (int cat : allowed_categories)
    if (cat != forced_cat) others.push_back(cat);
  require(!others.empty(), ErrorCode::CoverageUnreachable,
          "forced problems need a second category");

  ClusteringProblem out;
  const int n_cat = clamped_count(rng, cfg.categories_min, cfg.categories_max,
                                  avail);
  out.n_categories = n_cat;

  // The forced category first: the forced view, then optional extra objects.
  {
    const auto& objects = model.objects_by_category()[forced_cat];
    const int n_obj = clamped_count(rng, cfg.objects_min, cfg.objects_max,
                                    static_cast<int>(objects.size()));
    out.view_rows.push_back(forced_row);
    out.truth.push_back(forced_cat);
    std::vector<int> rest;
    for (int obj : objects)
      if (obj != forced_obj) rest.push_back(obj);
    for (std::uint32_t oi :
         rng.choose(static_cast<std::uint32_t>(rest.size()),
                    static_cast<std::uint32_t>(
                        std::min<int>(n_obj - 1,
                                      static_cast<int>(rest.size())))))
      append_object_view(model, forced_cat, rest[oi], rng, out);
  }

  for (std::uint32_t pick :
       rng.choose(static_cast<std::uint32_t>(others.size()),
                  static_cast<std::uint32_t>(n_cat - 1))) {
    const int cat = others[pick];
    const auto& objects = model.objects_by_category()[cat];
    const int n_obj = clamped_count(rng, cfg.objects_min, cfg.objects_max,
                                    static_cast<int>(objects.size()));
    for (std::uint32_t oi :
         rng.choose(static_cast<std::uint32_t>(objects.size()),
                    static_cast<std::uint32_t>(n_obj)))
      append_object_view(model, cat, objects[oi], rng, out);
  }
  return out;
}

namespace {

struct Accumulators {
  std::vector<std::uint64_t> sum_individual;
  std::vector<std::uint64_t> sum_global;
  std::vector<std::uint64_t> count;

  explicit Accumulators(std::size_t n)
      : sum_individual(n, 0), sum_global(n, 0), count(n, 0) {}

  void merge(const Accumulators& other) {
    for (std::size_t i = 0; i < count.size(); ++i) {
      sum_individual[i] += other.sum_individual[i];
      sum_global[i] += other.sum_global[i];
      count[i] += other.count[i];
    }
  }
};

struct ProblemContext {
  const DatasetModel* model = nullptr;
  const std::vector<int>* allowed = nullptr;
  const PipelineConfig* pipeline = nullptr;
  const SamplerConfig* cfg = nullptr;
  const std::vector<int>* row_to_entry = nullptr;
};

void process_problem(const ProblemContext& ctx, const ClusteringProblem& p,
                     ClusterScratch& scratch, ClusterAssignment& assignment,
                     PairConfusion& conf, Accumulators& acc) {
  const DatasetModel& model = *ctx.model;
  const int n = static_cast<int>(p.view_rows.size());
  const int d = model.feature_dim();

  scratch.points.resize(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const auto& features =
        model.records()[static_cast<std::size_t>(p.view_rows[i])].features;
    double* row = scratch.points.data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) row[j] = static_cast<double>(features[j]);
  }

  cluster_points(n, d, p.n_categories, *ctx.pipeline, scratch, assignment);
  pair_confusion(assignment, p.truth, conf);

  const std::uint64_t global_fx = ScoreFixed::quantize(fm_global(conf));
  for (int i = 0; i < n; ++i) {
    const int entry = (*ctx.row_to_entry)[static_cast<std::size_t>(
        p.view_rows[i])];
    if (entry < 0) continue;
    acc.sum_individual[entry] +=
        ScoreFixed::quantize(fm_individual(conf, static_cast<std::size_t>(i)));
    acc.sum_global[entry] += global_fx;
    ++acc.count[entry];
  }
}

// Runs problems [lo, hi) of the main phase (forced_rows == nullptr) or of
// the repair list, sharded over cfg->threads with per-problem RNG streams,
// and merges the shard accumulators in shard order.
void run_block(const ProblemContext& ctx, std::uint64_t lo, std::uint64_t hi,
               const std::vector<int>* forced_rows, Accumulators& total) {
  const int n_threads =
      static_cast<int>(std::min<std::uint64_t>(
          std::max(1, ctx.cfg->threads), std::max<std::uint64_t>(1, hi - lo)));
  std::vector<Accumulators> parts(n_threads, Accumulators(total.count.size()));

  auto worker = [&](int t) {
    const std::uint64_t span = hi - lo;
    const std::uint64_t begin = lo + span * t / n_threads;
    const std::uint64_t end = lo + span * (t + 1) / n_threads;
    ClusterScratch scratch;
    ClusterAssignment assignment;
    PairConfusion conf;
    for (std::uint64_t i = begin; i < end; ++i) {
      if (forced_rows) {
        Rng rng = Rng::substream(ctx.cfg->seed, "mc-repair", i);
        const ClusteringProblem p = sample_problem_including(
            *ctx.model, *ctx.allowed, *ctx.cfg, rng,
            (*forced_rows)[static_cast<std::size_t>(i)]);
        process_problem(ctx, p, scratch, assignment, conf, parts[t]);
      } else {
        Rng rng = Rng::substream(ctx.cfg->seed, "mc-problem",
                                 ctx.cfg->problem_index_offset + i);
        const ClusteringProblem p =
            sample_problem(*ctx.model, *ctx.allowed, *ctx.cfg, rng);
        process_problem(ctx, p, scratch, assignment, conf, parts[t]);
      }
    }
  };

  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& part : parts) total.merge(part);
}

void emit_audit(const char* phase, std::uint64_t problems,
                const Accumulators& acc) {
  std::vector<std::uint64_t> counts = acc.count;
  std::sort(counts.begin(), counts.end());
  const auto q = [&](double p) {
    return counts[static_cast<std::size_t>(p * (counts.size() - 1))];
  };
  std::cerr << "[svs-score] phase=" << phase << " problems=" << problems
            << " cov_min=" << counts.front() << " cov_p25=" << q(0.25)
            << " cov_p50=" << q(0.5) << " cov_p75=" << q(0.75)
            << " cov_max=" << counts.back() << '\n';
}

}  // namespace

ScoreTable accumulate_scores(const DatasetModel& model,
                             const CategorySplit& split,
                             const PipelineConfig& pipeline,
                             const SamplerConfig& cfg) {
  std::vector<int> allowed;
  for (const std::string& name : split.train_categories) {
    const int idx = model.category_index(name);
    require(idx >= 0, ErrorCode::InvalidArgument,
            "train category '" + name + "' not in the dataset");
    allowed.push_back(idx);
  }
  std::sort(allowed.begin(), allowed.end());
  require(static_cast<int>(allowed.size()) >= cfg.categories_min,
          ErrorCode::InsufficientCategories,
          "train split smaller than categories_min");
  if (cfg.min_coverage > 0)
    require(allowed.size() >= 2, ErrorCode::CoverageUnreachable,
            "coverage requires at least two train categories");

  // Entries in canonical order; map record rows to entry slots.
  ScoreTable table;
  std::vector<int> row_to_entry(model.records().size(), -1);
  std::vector<int> entry_rows;
  for (const PoseRef& pose : model.poses()) {
    if (!std::binary_search(allowed.begin(), allowed.end(),
                            pose.category_idx))
      continue;
    for (int row : pose.view_rows) entry_rows.push_back(row);
  }
  for (int row : entry_rows) {
    const ViewRecord& rec = model.records()[static_cast<std::size_t>(row)];
    row_to_entry[static_cast<std::size_t>(row)] =
        static_cast<int>(table.entries.size());
    ScoreTable::Entry entry;
    entry.id = rec.id;
    entry.theta = rec.theta;
    entry.phi = rec.phi;
    entry.is_top = rec.is_top;
    table.entries.push_back(std::move(entry));
  }
  require(!table.entries.empty(), ErrorCode::InvalidArgument,
          "no train views to score");

  ProblemContext ctx{&model, &allowed, &pipeline, &cfg, &row_to_entry};
  Accumulators acc(table.entries.size());

  const std::uint64_t block =
      cfg.progress_every ? cfg.progress_every : cfg.n_problems;
  for (std::uint64_t done = 0; done < cfg.n_problems;) {
    const std::uint64_t next = std::min(cfg.n_problems, done + block);
    run_block(ctx, done, next, nullptr, acc);
    done = next;
    if (cfg.progress_every) emit_audit("main", done, acc);
  }

  // Coverage repair: force under-covered views into fresh problems. A view
  // short by m gets m forced inclusions, so one pass reaches the floor.
  if (cfg.min_coverage > 0) {
    std::vector<int> forced_rows;
    for (std::size_t e = 0; e < table.entries.size(); ++e) {
      const std::uint64_t have = acc.count[e];
      for (std::uint64_t j = have; j < cfg.min_coverage; ++j)
        forced_rows.push_back(entry_rows[e]);
    }
    const std::uint64_t repair_block =
        cfg.progress_every ? cfg.progress_every : forced_rows.size();
    for (std::uint64_t done = 0; done < forced_rows.size();) {
      const std::uint64_t next =
          std::min<std::uint64_t>(forced_rows.size(), done + repair_block);
      run_block(ctx, done, next, &forced_rows, acc);
      done = next;
      if (cfg.progress_every) emit_audit("repair", done, acc);
    }
  }

  for (std::size_t e = 0; e < table.entries.size(); ++e) {
    table.entries[e].sum_individual_fx = acc.sum_individual[e];
    table.entries[e].sum_global_fx = acc.sum_global[e];
    table.entries[e].n_problems = acc.count[e];
  }
  if (cfg.progress_every) emit_audit("final", cfg.n_problems, acc);
  return table;
}

void rescale_per_pose(ScoreTable& table) {
  std::size_t start = 0;
  while (start < table.entries.size()) {
    std::size_t end = start + 1;
    const auto same_pose = [&](const ScoreTable::Entry& a,
                               const ScoreTable::Entry& b) {
      return a.id.category == b.id.category &&
             a.id.object_index == b.id.object_index &&
             a.id.pose_index == b.id.pose_index;
    };
    while (end < table.entries.size() &&
           same_pose(table.entries[start], table.entries[end]))
      ++end;

    double lo = table.entries[start].s_hat();
    double hi = lo;
    for (std::size_t i = start + 1; i < end; ++i) {
      const double s = table.entries[i].s_hat();
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    for (std::size_t i = start; i < end; ++i) {
      table.entries[i].scaled =
          hi > lo ? (table.entries[i].s_hat() - lo) / (hi - lo) : 0.5;
    }
    start = end;
  }
}

ScoreTable merge_scores(const ScoreTable& a, const ScoreTable& b) {
  require(a.entries.size() == b.entries.size(), ErrorCode::LengthMismatch,
          "tables cover different view sets");
  ScoreTable out = a;
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    require(a.entries[i].id == b.entries[i].id, ErrorCode::LengthMismatch,
            "tables cover different view sets");
    out.entries[i].sum_individual_fx += b.entries[i].sum_individual_fx;
    out.entries[i].sum_global_fx += b.entries[i].sum_global_fx;
    out.entries[i].n_problems += b.entries[i].n_problems;
    out.entries[i].scaled = 0.0;  // stale; re-run rescale_per_pose
  }
  return out;
}

namespace {
constexpr char kScoreMagic[4] = {'S', 'V', 'S', 'S'};
constexpr std::uint32_t kScoreVersion = 1;
}  // namespace

void save_scores(const ScoreTable& table, const std::filesystem::path& path,
                 std::uint64_t config_digest) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoFailure,
          "cannot open " + path.string() + " for writing");

  std::vector<std::string> categories;
  for (const auto& entry : table.entries)
    if (std::find(categories.begin(), categories.end(), entry.id.category) ==
        categories.end())
      categories.push_back(entry.id.category);
  std::string blob;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (i) blob.push_back('\n');
    blob += categories[i];
  }

  binio::write_magic(out, kScoreMagic);
  binio::write_u32(out, kScoreVersion);
  binio::write_u64(out, config_digest);
  binio::write_u32(out, static_cast<std::uint32_t>(blob.size()));
  binio::write_bytes(out, blob.data(), blob.size());
  binio::write_u64(out, table.entries.size());

  for (const auto& entry : table.entries) {
    const auto cat = std::find(categories.begin(), categories.end(),
                               entry.id.category);
    binio::write_u16(out, static_cast<std::uint16_t>(
                              cat - categories.begin()));
    binio::write_u16(out, static_cast<std::uint16_t>(entry.id.object_index));
    binio::write_u16(out, static_cast<std::uint16_t>(entry.id.pose_index));
    binio::write_u16(out, static_cast<std::uint16_t>(entry.id.view_index));
    binio::write_f32(out, static_cast<float>(entry.theta));
    binio::write_f32(out, static_cast<float>(entry.phi));
    binio::write_u8(out, entry.is_top ? 1 : 0);
    binio::write_f64(out, entry.sum_individual());
    binio::write_f64(out, entry.sum_global());
    binio::write_u64(out, entry.n_problems);
    binio::write_f64(out, entry.scaled);
  }
  out.flush();
  require(out.good(), ErrorCode::IoFailure, "write failed: " + path.string());
}

ScoreTable load_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());

  binio::expect_magic(in, kScoreMagic, path.string());
  const std::uint32_t version = binio::read_u32(in);
  require(version == kScoreVersion, ErrorCode::VersionMismatch,
          "unsupported score file version " + std::to_string(version));
  binio::read_u64(in);  // config digest, informational
  const std::uint32_t blob_len = binio::read_u32(in);
  std::string blob(blob_len, '\0');
  if (blob_len) binio::read_bytes(in, blob.data(), blob_len);
  std::vector<std::string> categories;
  {
    std::string cur;
    for (char c : blob) {
      if (c == '\n') {
        categories.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) categories.push_back(cur);
  }

  const std::uint64_t n = binio::read_u64(in);
  ScoreTable table;
  table.entries.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    ScoreTable::Entry entry;
    const std::uint16_t cat = binio::read_u16(in);
    require(cat < categories.size(), ErrorCode::MalformedHeader,
            "category index out of range in score file");
    entry.id.category = categories[cat];
    entry.id.object_index = binio::read_u16(in);
    entry.id.pose_index = binio::read_u16(in);
    entry.id.view_index = binio::read_u16(in);
    entry.theta = binio::read_f32(in);
    entry.phi = binio::read_f32(in);
    entry.is_top = binio::read_u8(in) != 0;
    entry.sum_individual_fx = ScoreFixed::quantize(binio::read_f64(in));
    entry.sum_global_fx = ScoreFixed::quantize(binio::read_f64(in));
    entry.n_problems = binio::read_u64(in);
    entry.scaled = binio::read_f64(in);
    table.entries.push_back(std::move(entry));
  }
  return table;
}

}  // namespace svs
