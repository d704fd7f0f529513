#include "svs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_set>

#include "svs/binio.hpp"
#include "svs/rng.hpp"

namespace svs {

namespace {

std::uint64_t pack_id(int cat_idx, const ViewId& id) {
  return (static_cast<std::uint64_t>(cat_idx) << 48) |
         (static_cast<std::uint64_t>(id.object_index & 0xffff) << 32) |
         (static_cast<std::uint64_t>(id.pose_index & 0xffff) << 16) |
         static_cast<std::uint64_t>(id.view_index & 0xffff);
}

}  // namespace

DatasetModel::DatasetModel(std::vector<ViewRecord> records, int feature_dim,
                           std::vector<std::string> category_list)
    : records_(std::move(records)),
      feature_dim_(feature_dim),
      categories_(std::move(category_list)) {
  require(!records_.empty(), ErrorCode::ModelInvariant, "dataset is empty");
  require(feature_dim_ > 0, ErrorCode::ModelInvariant,
          "feature_dim must be positive");
  require(!categories_.empty(), ErrorCode::ModelInvariant,
          "category list is empty");

  record_category_idx_.resize(records_.size());
  std::unordered_set<std::uint64_t> seen_ids;
  seen_ids.reserve(records_.size() * 2);

  // (cat, object, pose) -> pose id, built in first-seen order then sorted.
  std::map<std::tuple<int, int, int>, int> pose_of;

  for (std::size_t row = 0; row < records_.size(); ++row) {
    const ViewRecord& rec = records_[row];
    const int cat = category_index(rec.id.category);
    require(cat >= 0, ErrorCode::ModelInvariant,
            "record category '" + rec.id.category + "' not in category list");
    require(rec.id.object_index >= 0 && rec.id.pose_index >= 0 &&
                rec.id.view_index >= 0,
            ErrorCode::ModelInvariant, "negative index in ViewId");
    require(static_cast<int>(rec.features.size()) == feature_dim_,
            ErrorCode::DimensionMismatch,
            "record feature dimension " + std::to_string(rec.features.size()) +
                " != dataset dimension " + std::to_string(feature_dim_));
    require(rec.theta >= 0.0 && rec.theta < 360.0, ErrorCode::ModelInvariant,
            "theta out of [0, 360)");
    require(rec.phi > 0.0 && rec.phi <= 90.0, ErrorCode::ModelInvariant,
            "phi out of (0, 90]");
    require(seen_ids.insert(pack_id(cat, rec.id)).second,
            ErrorCode::DuplicateView, "duplicate ViewId at record " +
                                          std::to_string(row));
    record_category_idx_[row] = cat;

    const auto key =
        std::make_tuple(cat, rec.id.object_index, rec.id.pose_index);
    auto it = pose_of.find(key);
    if (it == pose_of.end()) {
      PoseRef pose;
      pose.category_idx = cat;
      pose.object_index = rec.id.object_index;
      pose.pose_index = rec.id.pose_index;
      it = pose_of.emplace(key, static_cast<int>(poses_.size())).first;
      poses_.push_back(std::move(pose));
    }
    PoseRef& pose = poses_[static_cast<std::size_t>(it->second)];
    pose.view_rows.push_back(static_cast<int>(row));
    if (rec.is_top) {
      require(pose.top_row < 0, ErrorCode::ModelInvariant,
              "pose has more than one top view");
      pose.top_row = static_cast<int>(row);
    }
  }

  // std::map iterates keys in canonical order already; rebuild poses_ sorted.
  std::vector<PoseRef> sorted;
  sorted.reserve(poses_.size());
  for (auto& [key, pid] : pose_of) {
    sorted.push_back(std::move(poses_[static_cast<std::size_t>(pid)]));
    pid = static_cast<int>(sorted.size()) - 1;
  }
  poses_ = std::move(sorted);

  record_pose_id_.assign(records_.size(), -1);
  for (std::size_t pid = 0; pid < poses_.size(); ++pid)
    for (int row : poses_[pid].view_rows)
      record_pose_id_[static_cast<std::size_t>(row)] = static_cast<int>(pid);

  poses_by_category_.assign(categories_.size(), {});
  object_poses_.assign(categories_.size(), {});
  objects_by_category_.assign(categories_.size(), {});
  for (std::size_t pid = 0; pid < poses_.size(); ++pid) {
    const PoseRef& pose = poses_[pid];
    require(pose.view_rows.size() >= 2, ErrorCode::ModelInvariant,
            "pose with fewer than 2 views");
    require(pose.top_row >= 0, ErrorCode::MissingTopView,
            "pose (" + categories_[pose.category_idx] + "," +
                std::to_string(pose.object_index) + "," +
                std::to_string(pose.pose_index) + ") has no top view");
    poses_by_category_[pose.category_idx].push_back(static_cast<int>(pid));
    auto& per_object = object_poses_[pose.category_idx];
    if (static_cast<int>(per_object.size()) <= pose.object_index)
      per_object.resize(pose.object_index + 1);
    per_object[pose.object_index].push_back(static_cast<int>(pid));
  }
  for (std::size_t c = 0; c < categories_.size(); ++c) {
    for (std::size_t obj = 0; obj < object_poses_[c].size(); ++obj)
      if (!object_poses_[c][obj].empty())
        objects_by_category_[c].push_back(static_cast<int>(obj));
  }
}

int DatasetModel::category_index(const std::string& name) const {
  for (std::size_t i = 0; i < categories_.size(); ++i)
    if (categories_[i] == name) return static_cast<int>(i);
  return -1;
}

int DatasetModel::find_row(const ViewId& id) const {
  const int cat = category_index(id.category);
  if (cat < 0) return -1;
  for (std::size_t row = 0; row < records_.size(); ++row) {
    const ViewRecord& rec = records_[row];
    if (record_category_idx_[row] == cat &&
        rec.id.object_index == id.object_index &&
        rec.id.pose_index == id.pose_index &&
        rec.id.view_index == id.view_index)
      return static_cast<int>(row);
  }
  return -1;
}

const std::vector<int>& DatasetModel::poses_of_object(int category_idx,
                                                      int object_index) const {
  return object_poses_[category_idx][object_index];
}

bool CategorySplit::is_test(const std::string& category) const {
  return std::binary_search(test_categories.begin(), test_categories.end(),
                            category);
}

namespace {
constexpr char kStoreMagic[4] = {'S', 'V', 'S', 'F'};
constexpr std::uint32_t kStoreVersion = 1;

std::vector<std::string> split_lines(const std::string& blob) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : blob) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}
}  // namespace

void save_feature_store(const DatasetModel& model,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoFailure,
          "cannot open " + path.string() + " for writing");

  std::string table;
  for (std::size_t i = 0; i < model.categories().size(); ++i) {
    if (i) table.push_back('\n');
    table += model.categories()[i];
  }

  binio::write_magic(out, kStoreMagic);
  binio::write_u32(out, kStoreVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(model.feature_dim()));
  binio::write_u64(out, model.records().size());
  binio::write_u32(out, static_cast<std::uint32_t>(table.size()));
  binio::write_bytes(out, table.data(), table.size());

  for (std::size_t row = 0; row < model.records().size(); ++row) {
    const ViewRecord& rec = model.records()[row];
    binio::write_u16(out,
                     static_cast<std::uint16_t>(model.record_category_idx(
                         static_cast<int>(row))));
    binio::write_u16(out, static_cast<std::uint16_t>(rec.id.object_index));
    binio::write_u16(out, static_cast<std::uint16_t>(rec.id.pose_index));
    binio::write_u16(out, static_cast<std::uint16_t>(rec.id.view_index));
    binio::write_f32(out, static_cast<float>(rec.theta));
    binio::write_f32(out, static_cast<float>(rec.phi));
    binio::write_u8(out, rec.is_top ? 1 : 0);
    for (float f : rec.features) binio::write_f32(out, f);
  }
  out.flush();
  require(out.good(), ErrorCode::IoFailure, "write to " + path.string() +
                                                " failed");
}

DatasetModel load_feature_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());

  binio::expect_magic(in, kStoreMagic, path.string());
  const std::uint32_t version = binio::read_u32(in);
  require(version == kStoreVersion, ErrorCode::VersionMismatch,
          "unsupported feature store version " + std::to_string(version));
  const std::uint32_t feature_dim = binio::read_u32(in);
  require(feature_dim > 0, ErrorCode::MalformedHeader, "feature_dim == 0");
  const std::uint64_t n_records = binio::read_u64(in);
  const std::uint32_t table_len = binio::read_u32(in);
  std::string table(table_len, '\0');
  if (table_len) binio::read_bytes(in, table.data(), table_len);
  const std::vector<std::string> categories = split_lines(table);
  require(!categories.empty(), ErrorCode::MalformedHeader,
          "empty category table");

  std::vector<ViewRecord> records;
  records.reserve(n_records);
  for (std::uint64_t row = 0; row < n_records; ++row) {
    ViewRecord rec;
    const std::uint16_t cat_idx = binio::read_u16(in);
    require(cat_idx < categories.size(), ErrorCode::MalformedHeader,
            "category index out of range at record " + std::to_string(row));
    rec.id.category = categories[cat_idx];
    rec.id.object_index = binio::read_u16(in);
    rec.id.pose_index = binio::read_u16(in);
    rec.id.view_index = binio::read_u16(in);
    rec.theta = binio::read_f32(in);
    rec.phi = binio::read_f32(in);
    rec.is_top = binio::read_u8(in) != 0;
    rec.features.resize(feature_dim);
    for (std::uint32_t i = 0; i < feature_dim; ++i)
      rec.features[i] = binio::read_f32(in);
    records.push_back(std::move(rec));
  }
  return DatasetModel(std::move(records), static_cast<int>(feature_dim),
                      categories);
}

DatasetModel import_feature_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path.string());

  std::vector<ViewRecord> records;
  std::vector<std::string> categories;
  int feature_dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    require(fields.size() >= 8, ErrorCode::MalformedHeader,
            "line " + std::to_string(line_no) + ": expected at least 8 fields");

    ViewRecord rec;
    try {
      rec.id.category = fields[0];
      rec.id.object_index = std::stoi(fields[1]);
      rec.id.pose_index = std::stoi(fields[2]);
      rec.id.view_index = std::stoi(fields[3]);
      rec.theta = std::stod(fields[4]);
      rec.phi = std::stod(fields[5]);
      rec.is_top = std::stoi(fields[6]) != 0;
      for (std::size_t i = 7; i < fields.size(); ++i)
        rec.features.push_back(std::stof(fields[i]));
    } catch (const std::exception&) {
      fail(ErrorCode::MalformedHeader,
           "line " + std::to_string(line_no) + ": unparsable field");
    }
    const int dim = static_cast<int>(rec.features.size());
    if (feature_dim < 0) feature_dim = dim;
    require(dim == feature_dim, ErrorCode::DimensionMismatch,
            "line " + std::to_string(line_no) + ": feature dimension " +
                std::to_string(dim) + " != " + std::to_string(feature_dim));
    if (std::find(categories.begin(), categories.end(), rec.id.category) ==
        categories.end())
      categories.push_back(rec.id.category);
    records.push_back(std::move(rec));
  }
  require(!records.empty(), ErrorCode::ModelInvariant,
          "no records in " + path.string());
  return DatasetModel(std::move(records), feature_dim, categories);
}

CategorySplit split_categories(const DatasetModel& model, int n_test,
                               std::uint64_t seed) {
  const int n = static_cast<int>(model.categories().size());
  require(n_test > 0 && n_test < n, ErrorCode::InvalidArgument,
          "n_test must be in (0, " + std::to_string(n) + ")");

  std::vector<std::string> shuffled = model.categories();
  Rng rng = Rng::substream(seed, "category-split");
  rng.shuffle(shuffled);

  CategorySplit split;
  split.test_categories.assign(shuffled.begin(), shuffled.begin() + n_test);
  split.train_categories.assign(shuffled.begin() + n_test, shuffled.end());
  std::sort(split.test_categories.begin(), split.test_categories.end());
  std::sort(split.train_categories.begin(), split.train_categories.end());
  return split;
}

}  // namespace svs
