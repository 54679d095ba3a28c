#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "rqi/image/image.h"

namespace rqi {

inline constexpr int kNiqeFeatureCount = 36;
using NiqeFeatures = std::array<double, kNiqeFeatureCount>;

// Gamma function by the Lanczos approximation (g = 7, 9 terms); relative
// error below 1e-13 for positive arguments up to ~170.
double gamma_lanczos(double x);

// Local Gaussian statistics use sigma 7/6 and radius 3.
struct MscnResult {
  ImagePlane coefficients;  // (I - mu) / (sigma + 1)
  ImagePlane local_sigma;
};
MscnResult mscn_with_sigma(const ImagePlane& p);
inline ImagePlane mscn(const ImagePlane& p) { return mscn_with_sigma(p).coefficients; }

struct GgdFit {
  double alpha = 0.0;
  double sigma = 0.0;
};

struct AggdFit {
  double alpha = 0.0;
  double sigma_left = 0.0;
  double sigma_right = 0.0;
  double mean_offset = 0.0;
};

// Moment matching over the shape grid alpha = 0.2, 0.201, ..., 10. Both need
// at least 100 samples (InsufficientData) and non-zero variance
// (DegenerateInput; variance <= 1e-12 counts as zero).
GgdFit fit_ggd(std::span<const double> samples);
AggdFit fit_aggd(std::span<const double> samples);

// 18 features per scale (MSCN alpha and mean sigma; alpha, mean offset and
// both squared sigmas for the H, V, D1 and D2 neighbour products), at native
// scale and after one downscale_half.
NiqeFeatures niqe_features(const ImagePlane& p);
// Feature vector of the mirrored plane: D1 and D2 blocks swapped.
NiqeFeatures mirrored(const NiqeFeatures& f);

struct PristineModel {
  std::array<double, kNiqeFeatureCount> mu{};
  std::vector<double> cov;  // row-major 36 x 36
  int patch_size = 96;
  double sharpness_quantile = 0.75;
};

// Tiles of patch_size x patch_size in row-major order; partial tiles dropped.
std::vector<CropRect> tile_grid(int width, int height, int patch_size);

// Fits the pristine MVG on the sharpest tiles: those whose mean local sigma
// reaches the nearest-rank quantile of the whole corpus. Flat tiles are
// skipped. Every kept tile also contributes its horizontally mirrored feature
// vector (D1 and D2 swapped). Adds 1e-6 to the covariance diagonal.
PristineModel fit_pristine_model(std::span<const ImagePlane> corpus, int patch_size = 96,
                                 double sharpness_quantile = 0.75);

// Distance between the pristine MVG and the MVG of the image's own sharpest
// tiles (same quantile rule, applied within the image, mirrored tiles
// included); lower is better.
double niqe_score(const ImagePlane& img, const PristineModel& model);

// Little-endian: "NIQE1", u32 patch, f64 quantile, 36 f64 means, 36x36 f64 cov.
void save_pristine_model(const PristineModel& model, const std::filesystem::path& path);
PristineModel load_pristine_model(const std::filesystem::path& path);

}  // namespace rqi
