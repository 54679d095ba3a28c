#pragma once

#include <span>
#include <vector>

namespace rqi {

// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

// Pearson correlation. Throws DimensionError for unequal lengths or n < 3,
// DegenerateInput when either sequence is constant.
double plcc(std::span<const double> x, std::span<const double> y);
// Spearman correlation: Pearson on average ranks.
double srcc(std::span<const double> x, std::span<const double> y);

// Index of the largest value (first one on ties).
std::size_t argmax_first(std::span<const double> x);

}  // namespace rqi
