#include "rqi/stats/thurstone.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rqi/error.h"

namespace rqi {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

CountMatrix::CountMatrix(std::vector<std::string> ids)
    : items(std::move(ids)), wins(items.size(), std::vector<long>(items.size(), 0)) {}

QualityScale thurstone_scale(const CountMatrix& counts) {
  const std::size_t m = counts.size();
  if (counts.wins.size() != m) throw DimensionError("thurstone: wins matrix does not match items");
  for (std::size_t i = 0; i < m; ++i) {
    if (counts.wins[i].size() != m) throw DimensionError("thurstone: wins matrix is not square");
    if (counts.wins[i][i] != 0) throw DimensionError("thurstone: diagonal must be zero");
    for (std::size_t j = 0; j < m; ++j) {
      if (counts.wins[i][j] < 0) throw DimensionError("thurstone: negative count");
    }
  }
  QualityScale scale{counts.items, std::vector<double>(m, 0.0)};
  if (m == 0) return scale;
  for (std::size_t i = 0; i < m; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const long n = counts.total(i, j);
      if (n == 0) {
        throw InsufficientData("thurstone: pair (" + counts.items[i] + ", " + counts.items[j] +
                               ") was never compared");
      }
      const double lo = 1.0 / (2.0 * static_cast<double>(n));
      const double p = std::clamp(static_cast<double>(counts.wins[i][j]) / static_cast<double>(n),
                                  lo, 1.0 - lo);
      row += normal_quantile(p);
    }
    scale.scores[i] = row / static_cast<double>(m);
  }
  const double mean = std::accumulate(scale.scores.begin(), scale.scores.end(), 0.0) /
                      static_cast<double>(m);
  for (double& s : scale.scores) s -= mean;
  return scale;
}

}  // namespace rqi
