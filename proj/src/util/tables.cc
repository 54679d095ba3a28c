#include "rqi/tables.h"

#include <algorithm>
#include <set>

#include "rqi/error.h"
#include "rqi/util/file.h"
#include "rqi/util/csv.h"

namespace rqi {

MetricDirections::MetricDirections()
    : map_{{"psnr", Direction::kHigherIsBetter},   {"ssim", Direction::kHigherIsBetter},
           {"niqe", Direction::kLowerIsBetter},    {"lpips", Direction::kLowerIsBetter},
           {"dists", Direction::kLowerIsBetter},   {"pi", Direction::kLowerIsBetter},
           {"rqi", Direction::kHigherIsBetter},    {"clipiqa", Direction::kHigherIsBetter},
           {"maniqa", Direction::kHigherIsBetter}} {}

Direction MetricDirections::of(const std::string& metric) const {
  auto it = map_.find(metric);
  if (it == map_.end()) {
    throw SchemaError("no ranking direction declared for metric '" + metric + "'");
  }
  return it->second;
}

void MetricDirections::set_from_spec(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw SchemaError("direction must look like name=higher or name=lower: " + spec);
  }
  const std::string name = spec.substr(0, eq);
  const std::string dir = spec.substr(eq + 1);
  if (dir == "higher") {
    set(name, Direction::kHigherIsBetter);
  } else if (dir == "lower") {
    set(name, Direction::kLowerIsBetter);
  } else {
    throw SchemaError("direction must be 'higher' or 'lower': " + spec);
  }
}

namespace {

template <typename Proj>
std::vector<std::string> unique_sorted(const std::vector<MetricRow>& rows, Proj proj) {
  std::set<std::string> ids;
  for (const auto& r : rows) ids.insert(proj(r));
  return {ids.begin(), ids.end()};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<std::string> MetricScoreTable::metrics() const {
  return unique_sorted(rows, [](const MetricRow& r) { return r.metric; });
}
std::vector<std::string> MetricScoreTable::contents() const {
  return unique_sorted(rows, [](const MetricRow& r) { return r.content_id; });
}
std::vector<std::string> MetricScoreTable::models() const {
  return unique_sorted(rows, [](const MetricRow& r) { return r.model_id; });
}

ScoreGrid MetricScoreTable::grid(const std::string& metric) const {
  ScoreGrid g;
  std::vector<const MetricRow*> selected;
  for (const auto& r : rows) {
    if (r.metric == metric) selected.push_back(&r);
  }
  if (selected.empty()) throw SchemaError("no rows for metric '" + metric + "'");
  // Every metric must cover the whole table's contents x models grid.
  g.contents = contents();
  g.models = models();
  std::vector<std::vector<int>> seen(g.contents.size(), std::vector<int>(g.models.size(), 0));
  g.values.assign(g.contents.size(), std::vector<double>(g.models.size(), 0.0));
  for (const MetricRow* r : selected) {
    const auto ci = std::lower_bound(g.contents.begin(), g.contents.end(), r->content_id) - g.contents.begin();
    const auto mi = std::lower_bound(g.models.begin(), g.models.end(), r->model_id) - g.models.begin();
    if (seen[ci][mi]++) {
      throw SchemaError("duplicate score for (" + r->content_id + ", " + r->model_id + ", " + metric + ")");
    }
    g.values[ci][mi] = r->score;
  }
  for (std::size_t c = 0; c < g.contents.size(); ++c) {
    for (std::size_t m = 0; m < g.models.size(); ++m) {
      if (!seen[c][m]) {
        throw SchemaError("incomplete grid: no " + metric + " score for (" + g.contents[c] + ", " +
                          g.models[m] + ")");
      }
    }
  }
  return g;
}

MetricScoreTable read_metric_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto c = csv.column("content_id");
  const auto m = csv.column("model_id");
  const auto k = csv.column("metric");
  const auto s = csv.column("score");
  MetricScoreTable table;
  for (const auto& row : csv.rows) {
    table.rows.push_back(MetricRow{row[c], row[m], row[k], parse_number(row[s])});
  }
  return table;
}

std::string format_metric_csv(const std::vector<MetricRow>& rows) {
  CsvTable csv{{"content_id", "model_id", "metric", "score"}, {}};
  for (const auto& r : rows) {
    csv.rows.push_back({r.content_id, r.model_id, r.metric, format_number(r.score)});
  }
  return format_csv(csv);
}

void write_metric_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  write_text_file(path, format_metric_csv(rows));
}

std::map<std::string, double> read_gt_quality_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto c = csv.column("content_id");
  const auto q = csv.column("gt_quality");
  std::map<std::string, double> out;
  for (const auto& row : csv.rows) {
    if (!out.emplace(row[c], parse_number(row[q])).second) {
      throw SchemaError("duplicate gt_quality for content " + row[c]);
    }
  }
  return out;
}

void write_gt_quality_csv(const std::map<std::string, double>& q, const std::filesystem::path& path) {
  CsvTable csv{{"content_id", "gt_quality"}, {}};
  for (const auto& [content, value] : q) csv.rows.push_back({content, format_number(value)});
  write_csv(csv, path);
}

UserScales read_user_scales_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto c = csv.column("content_id");
  const auto m = csv.column("model_id");
  const auto s = csv.column("thurstone_score");
  UserScales out;
  for (const auto& row : csv.rows) {
    if (!out[row[c]].emplace(row[m], parse_number(row[s])).second) {
      throw SchemaError("duplicate thurstone_score for (" + row[c] + ", " + row[m] + ")");
    }
  }
  return out;
}

void write_user_scales_csv(const UserScales& scales, const std::filesystem::path& path) {
  CsvTable csv{{"content_id", "model_id", "thurstone_score"}, {}};
  for (const auto& [content, models] : scales) {
    for (const auto& [model, score] : models) csv.rows.push_back({content, model, format_number(score)});
  }
  write_csv(csv, path);
}

std::vector<ManifestEntry> read_image_manifest(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto c = csv.column("content_id");
  const auto m = csv.column("model_id");
  const auto i = csv.column("image_path");
  const auto r = csv.column("reference_path");
  const auto base = path.parent_path();
  std::vector<ManifestEntry> out;
  for (const auto& row : csv.rows) {
    out.push_back(ManifestEntry{row[c], row[m], resolve(base, row[i]), resolve(base, row[r])});
  }
  return out;
}

void write_image_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  CsvTable csv{{"content_id", "model_id", "image_path", "reference_path"}, {}};
  for (const auto& e : entries) {
    csv.rows.push_back({e.content_id, e.model_id, e.image_path.string(), e.reference_path.string()});
  }
  write_csv(csv, path);
}

}  // namespace rqi
