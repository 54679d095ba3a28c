#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rqi {

enum class Direction { kHigherIsBetter, kLowerIsBetter };

// Per-metric ranking direction. Ships with defaults for the metrics the
// toolkit computes or ingests; unknown names are a SchemaError on lookup.
class MetricDirections {
 public:
  MetricDirections();
  static MetricDirections empty() { return MetricDirections(std::map<std::string, Direction>{}); }

  Direction of(const std::string& metric) const;
  bool higher_is_better(const std::string& metric) const {
    return of(metric) == Direction::kHigherIsBetter;
  }
  bool contains(const std::string& metric) const { return map_.contains(metric); }
  void set(const std::string& metric, Direction d) { map_[metric] = d; }
  // Parses "name=higher" / "name=lower".
  void set_from_spec(const std::string& spec);

 private:
  explicit MetricDirections(std::map<std::string, Direction> m) : map_(std::move(m)) {}
  std::map<std::string, Direction> map_;
};

struct MetricRow {
  std::string content_id;
  std::string model_id;
  std::string metric;
  double score = 0.0;
};

// Dense content x model view of one metric; ids in lexicographic order.
struct ScoreGrid {
  std::vector<std::string> contents;
  std::vector<std::string> models;
  std::vector<std::vector<double>> values;  // [content][model]
};

struct MetricScoreTable {
  std::vector<MetricRow> rows;
  std::map<std::string, double> gt_quality;

  std::vector<std::string> metrics() const;
  std::vector<std::string> contents() const;
  std::vector<std::string> models() const;
  // Throws SchemaError on a missing or duplicated (content, model) cell.
  ScoreGrid grid(const std::string& metric) const;
};

// Header: content_id,model_id,metric,score
MetricScoreTable read_metric_csv(const std::filesystem::path& path);
void write_metric_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);
std::string format_metric_csv(const std::vector<MetricRow>& rows);

// Header: content_id,gt_quality
std::map<std::string, double> read_gt_quality_csv(const std::filesystem::path& path);
void write_gt_quality_csv(const std::map<std::string, double>& q, const std::filesystem::path& path);

// Header: content_id,model_id,thurstone_score. Result: content -> model -> score.
using UserScales = std::map<std::string, std::map<std::string, double>>;
UserScales read_user_scales_csv(const std::filesystem::path& path);
void write_user_scales_csv(const UserScales& scales, const std::filesystem::path& path);

// Header: content_id,model_id,image_path,reference_path
struct ManifestEntry {
  std::string content_id;
  std::string model_id;
  std::filesystem::path image_path;
  std::filesystem::path reference_path;
};
// Relative paths are resolved against the manifest's directory.
std::vector<ManifestEntry> read_image_manifest(const std::filesystem::path& path);
void write_image_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

}  // namespace rqi
