#pragma once

#include <string>
#include <vector>

namespace rqi {

// Standard normal CDF.
double normal_cdf(double z);
// Standard normal quantile, Wichura's AS 241 (PPND16) rational
// approximation; relative accuracy about 1e-16 on (0, 1).
double normal_quantile(double p);

// wins[i][j] = number of times items[i] was preferred over items[j].
struct CountMatrix {
  std::vector<std::string> items;
  std::vector<std::vector<long>> wins;

  explicit CountMatrix(std::vector<std::string> ids = {});
  std::size_t size() const { return items.size(); }
  long total(std::size_t i, std::size_t j) const { return wins[i][j] + wins[j][i]; }
};

// Mean-centred quality scores, aligned with `items`.
struct QualityScale {
  std::vector<std::string> items;
  std::vector<double> scores;
};

// Thurstone Case V by column means. Each proportion p = wins/total is clamped
// to [1/(2N), 1 - 1/(2N)], mapped through the normal quantile, averaged over
// all m columns (the diagonal contributes z = 0) and then mean-centred.
// Throws InsufficientData if any off-diagonal pair has no comparisons and
// DimensionError on a malformed matrix.
QualityScale thurstone_scale(const CountMatrix& counts);

}  // namespace rqi
