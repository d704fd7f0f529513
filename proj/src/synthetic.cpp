#include "svs/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "svs/geometry.hpp"
#include "svs/rng.hpp"

namespace svs {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kSeparationBudget = 10000;

std::vector<double> random_sphere_point(Rng& rng, int dim, double radius) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.gaussian();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x *= radius / norm;
  return v;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

// q for PhiDependent: smooth monotone fall from hi at phi=45 to lo at
// phi=90. A falloff exponent above 1 keeps the two best slant rings close
// to quality_hi, which parks the category cluster core at the good views;
// with a symmetric curve the core lands mid-range and mid-quality views
// out-cluster the best ones.
double phi_quality(double phi, const WorldConfig& cfg) {
  const double t = std::clamp((phi - 45.0) / 45.0, 0.0, 1.0);
  const double c = std::cos(0.5 * kPi * std::pow(t, cfg.quality_falloff));
  return cfg.quality_lo + (cfg.quality_hi - cfg.quality_lo) * c * c;
}

std::string category_name(int i) {
  std::ostringstream os;
  os << "cat_" << (i < 10 ? "0" : "") << i;
  return os.str();
}

}  // namespace

std::pair<DatasetModel, QualityMap> generate_world(const WorldConfig& cfg) {
  require(cfg.n_categories >= 2, ErrorCode::InvalidArgument,
          "need at least 2 categories");
  require(cfg.objects_min >= 1 && cfg.objects_min <= cfg.objects_max,
          ErrorCode::InvalidArgument, "bad objects range");
  require(cfg.poses_per_object >= 1, ErrorCode::InvalidArgument,
          "poses_per_object must be >= 1");
  require(cfg.feature_dim >= 2, ErrorCode::InvalidArgument,
          "feature_dim must be >= 2");
  require(cfg.category_separation > 0.0, ErrorCode::InvalidArgument,
          "category_separation must be positive");
  require(cfg.object_spread >= 0.0 && cfg.pose_spread >= 0.0 &&
              cfg.noise_scale >= 0.0,
          ErrorCode::InvalidArgument, "spreads must be non-negative");

  const std::vector<GridAngle> grid = pose_grid();
  const int max_views = static_cast<int>(grid.size()) + 1;  // + top view
  require(cfg.views_per_pose_min >= 2 &&
              cfg.views_per_pose_min <= cfg.views_per_pose_max &&
              cfg.views_per_pose_max <= max_views,
          ErrorCode::InvalidArgument,
          "views per pose must be in [2, " + std::to_string(max_views) + "]");

  Rng rng = Rng::substream(cfg.seed, "world");

  // The confounder sits near the middle of the category sphere, so views
  // collapse toward a common point as quality falls and every category's
  // quality axis points away from every other category's. Placing it out
  // at sphere distance instead would make top-quality views sit as far
  // from their own category's mediocre views as from other categories.
  const std::vector<double> confounder =
      random_sphere_point(rng, cfg.feature_dim,
                          0.05 * cfg.category_separation);

  // Category centers on the sphere, pairwise separated.
  std::vector<std::vector<double>> centers;
  for (int i = 0; i < cfg.n_categories; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kSeparationBudget; ++attempt) {
      std::vector<double> p =
          random_sphere_point(rng, cfg.feature_dim, cfg.category_separation);
      bool ok = true;
      for (const auto& other : centers)
        if (dist(p, other) < cfg.category_separation) {
          ok = false;
          break;
        }
      if (ok) {
        centers.push_back(std::move(p));
        placed = true;
        break;
      }
    }
    require(placed, ErrorCode::SeparationInfeasible,
            "cannot place " + std::to_string(cfg.n_categories) +
                " separated centers in dimension " +
                std::to_string(cfg.feature_dim));
  }

  std::vector<ViewRecord> records;
  std::vector<double> qualities;
  std::vector<std::string> categories;

  for (int cat = 0; cat < cfg.n_categories; ++cat) {
    categories.push_back(category_name(cat));
    const std::vector<double>& center = centers[cat];
    const int n_objects = static_cast<int>(
        rng.uniform_int(cfg.objects_min, cfg.objects_max));

    for (int obj = 0; obj < n_objects; ++obj) {
      std::vector<double> obj_offset(cfg.feature_dim);
      for (double& x : obj_offset) x = rng.gaussian() * cfg.object_spread;

      for (int pose = 0; pose < cfg.poses_per_object; ++pose) {
        std::vector<double> anchor(cfg.feature_dim);
        for (int i = 0; i < cfg.feature_dim; ++i)
          anchor[i] = center[i] + obj_offset[i] +
                      rng.gaussian() * cfg.pose_spread;

        const int n_views = static_cast<int>(
            rng.uniform_int(cfg.views_per_pose_min, cfg.views_per_pose_max));
        // Top view plus a random subset of the grid.
        std::vector<GridAngle> angles{{90.0, 90.0}};
        for (std::uint32_t gi :
             rng.choose(static_cast<std::uint32_t>(grid.size()),
                        static_cast<std::uint32_t>(n_views - 1)))
          angles.push_back(grid[gi]);
        std::sort(angles.begin() + 1, angles.end(),
                  [](const GridAngle& a, const GridAngle& b) {
                    return a.theta != b.theta ? a.theta < b.theta
                                              : a.phi < b.phi;
                  });

        for (std::size_t vi = 0; vi < angles.size(); ++vi) {
          const GridAngle& ang = angles[vi];
          double q = 0.0;
          switch (cfg.quality_model) {
            case QualityModel::RandomUniform:
              q = rng.uniform01();
              break;
            case QualityModel::PhiDependent:
              q = phi_quality(ang.phi, cfg) +
                  rng.uniform(-cfg.quality_jitter, cfg.quality_jitter);
              break;
          }
          q = std::clamp(q, 0.0, 1.0);

          ViewRecord rec;
          rec.id.category = categories.back();
          rec.id.object_index = obj;
          rec.id.pose_index = pose;
          rec.id.view_index = static_cast<int>(vi);
          rec.theta = ang.theta;
          rec.phi = ang.phi;
          rec.is_top = vi == 0;
          rec.features.resize(cfg.feature_dim);
          for (int i = 0; i < cfg.feature_dim; ++i) {
            const double value = q * anchor[i] + (1.0 - q) * confounder[i] +
                                 rng.gaussian() * cfg.noise_scale;
            rec.features[i] = static_cast<float>(value);
          }
          records.push_back(std::move(rec));
          qualities.push_back(q);
        }
      }
    }
  }

  DatasetModel model(std::move(records), cfg.feature_dim, categories);
  QualityMap map;
  map.q_by_row = std::move(qualities);
  return {std::move(model), std::move(map)};
}

std::pair<DatasetModel, QualityMap> emit_paper_shaped_world(
    std::uint64_t seed) {
  WorldConfig cfg;
  cfg.seed = seed;
  cfg.views_per_pose_min = 17;
  cfg.views_per_pose_max = 21;
  return generate_world(cfg);
}

void save_quality_map(const DatasetModel& model, const QualityMap& map,
                      const std::filesystem::path& path,
                      std::uint64_t config_digest) {
  require(map.q_by_row.size() == model.records().size(),
          ErrorCode::LengthMismatch, "quality map does not match model");
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoFailure,
          "cannot open " + path.string() + " for writing");
  out << "# svs-quality v1\n";
  if (config_digest) {
    out << "# config-digest " << std::hex << config_digest << std::dec
        << "\n";
  }
  out << "# category,object,pose,view,q\n";
  out.precision(17);
  for (std::size_t row = 0; row < model.records().size(); ++row) {
    const ViewId& id = model.records()[row].id;
    out << id.category << ',' << id.object_index << ',' << id.pose_index
        << ',' << id.view_index << ',' << map.q_by_row[row] << '\n';
  }
  require(out.good(), ErrorCode::IoFailure, "write failed: " + path.string());
}

QualityMap load_quality_map(const DatasetModel& model,
                            const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());

  std::map<std::tuple<std::string, int, int, int>, double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cat, obj, pose, view, q;
    std::getline(ss, cat, ',');
    std::getline(ss, obj, ',');
    std::getline(ss, pose, ',');
    std::getline(ss, view, ',');
    std::getline(ss, q, ',');
    values[{cat, std::stoi(obj), std::stoi(pose), std::stoi(view)}] =
        std::stod(q);
  }

  QualityMap map;
  map.q_by_row.resize(model.records().size());
  for (std::size_t row = 0; row < model.records().size(); ++row) {
    const ViewId& id = model.records()[row].id;
    const auto it = values.find(
        {id.category, id.object_index, id.pose_index, id.view_index});
    require(it != values.end(), ErrorCode::MalformedHeader,
            "quality map misses a model view");
    map.q_by_row[row] = it->second;
  }
  return map;
}

}  // namespace svs
