#include "rqi/stats/consistency.h"

#include <algorithm>

#include "rqi/error.h"
#include "rqi/stats/correlation.h"
#include "rqi/util/csv.h"
#include "rqi/util/file.h"

namespace rqi {

double winning_rate(const std::vector<std::vector<double>>& metric_scores,
                    const std::vector<std::vector<double>>& user_scales, bool higher_is_better) {
  if (metric_scores.size() != user_scales.size()) {
    throw DimensionError("winning_rate: content counts differ");
  }
  if (metric_scores.empty()) throw DimensionError("winning_rate: no contents");
  int wins = 0;
  for (std::size_t c = 0; c < metric_scores.size(); ++c) {
    if (metric_scores[c].size() != user_scales[c].size() || metric_scores[c].empty()) {
      throw DimensionError("winning_rate: model sets differ for content " + std::to_string(c));
    }
    std::vector<double> oriented = metric_scores[c];
    if (!higher_is_better) {
      for (double& v : oriented) v = -v;
    }
    if (argmax_first(oriented) == argmax_first(user_scales[c])) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(metric_scores.size());
}

std::vector<ConsistencyRow> per_content_consistency(const MetricScoreTable& table,
                                                    const UserScales& user_scales,
                                                    const MetricDirections& directions,
                                                    const ConsistencyOptions& options) {
  std::vector<ConsistencyRow> report;
  for (const std::string& metric : table.metrics()) {
    const ScoreGrid grid = table.grid(metric);
    const bool higher = directions.higher_is_better(metric);

    std::vector<std::size_t> model_columns;
    for (std::size_t m = 0; m < grid.models.size(); ++m) {
      if (options.include_reference || grid.models[m] != options.reference_id) model_columns.push_back(m);
    }

    std::vector<std::string> user_contents;
    for (const auto& [content, _] : user_scales) user_contents.push_back(content);
    if (user_contents != grid.contents) {
      throw SchemaError("metric '" + metric + "' and the user scales cover different contents");
    }

    ConsistencyRow row{metric};
    std::vector<std::vector<double>> metric_rows;
    std::vector<std::vector<double>> user_rows;
    double srcc_sum = 0.0;
    double plcc_sum = 0.0;
    for (std::size_t c = 0; c < grid.contents.size(); ++c) {
      const auto& users = user_scales.at(grid.contents[c]);
      std::vector<double> x;
      std::vector<double> y;
      for (std::size_t m : model_columns) {
        auto it = users.find(grid.models[m]);
        if (it == users.end()) {
          throw SchemaError("no user score for (" + grid.contents[c] + ", " + grid.models[m] + ")");
        }
        x.push_back(higher ? grid.values[c][m] : -grid.values[c][m]);
        y.push_back(it->second);
      }
      std::size_t expected = users.size();
      if (!options.include_reference && users.contains(options.reference_id)) --expected;
      if (expected != x.size()) {
        throw SchemaError("user scale for content " + grid.contents[c] + " has models the metric table lacks");
      }
      metric_rows.push_back(x);
      user_rows.push_back(y);
      try {
        const double s = srcc(x, y);
        const double p = plcc(x, y);
        srcc_sum += s;
        plcc_sum += p;
        ++row.n_contents;
      } catch (const DegenerateInput&) {
        ++row.n_skipped;
      }
    }
    if (row.n_contents > 0) {
      row.mean_srcc = srcc_sum / row.n_contents;
      row.mean_plcc = plcc_sum / row.n_contents;
    }
    // Scores are already oriented so that higher is better.
    row.winning_rate = winning_rate(metric_rows, user_rows, true);
    report.push_back(row);
  }
  return report;
}

std::string format_consistency_csv(const std::vector<ConsistencyRow>& rows) {
  CsvTable csv{{"metric", "mean_srcc", "mean_plcc", "winning_rate", "n_contents", "n_skipped"}, {}};
  for (const auto& r : rows) {
    csv.rows.push_back({r.metric, format_number(r.mean_srcc), format_number(r.mean_plcc),
                        format_number(r.winning_rate), std::to_string(r.n_contents),
                        std::to_string(r.n_skipped)});
  }
  return format_csv(csv);
}

void write_consistency_csv(const std::vector<ConsistencyRow>& rows, const std::filesystem::path& path) {
  write_text_file(path, format_consistency_csv(rows));
}

}  // namespace rqi
