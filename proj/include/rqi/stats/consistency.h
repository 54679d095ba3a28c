#pragma once

#include <string>
#include <vector>

#include "rqi/tables.h"

namespace rqi {

// Fraction of contents whose best model under the metric equals the argmax
// of the user scale. Rows are contents, columns models in canonical order;
// ties resolve to the first model on both sides. Lower-is-better metrics
// pick the minimum.
double winning_rate(const std::vector<std::vector<double>>& metric_scores,
                    const std::vector<std::vector<double>>& user_scales, bool higher_is_better);

struct ConsistencyOptions {
  bool include_reference = false;
  // Model id of the reference (GT) item in both tables.
  std::string reference_id = "GT";
};

struct ConsistencyRow {
  std::string metric;
  double mean_srcc = 0.0;
  double mean_plcc = 0.0;
  double winning_rate = 0.0;
  int n_contents = 0;  // contents contributing to the means
  int n_skipped = 0;   // contents where the metric was constant
};

// Per-content SRCC/PLCC between each metric's model scores and the user
// scale, averaged over contents. Lower-is-better metrics are negated first
// so that positive correlation always means agreement. Throws SchemaError
// when content or model ids differ between the tables.
std::vector<ConsistencyRow> per_content_consistency(const MetricScoreTable& table,
                                                    const UserScales& user_scales,
                                                    const MetricDirections& directions,
                                                    const ConsistencyOptions& options = {});

// Header: metric,mean_srcc,mean_plcc,winning_rate,n_contents,n_skipped
std::string format_consistency_csv(const std::vector<ConsistencyRow>& rows);
void write_consistency_csv(const std::vector<ConsistencyRow>& rows, const std::filesystem::path& path);

}  // namespace rqi
