#pragma once

#include <limits>

#include "rqi/image/image.h"

namespace rqi {

// Returned by psnr() for identical inputs. Serialised as "inf" in CSV output.
inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

double mse(const ImagePlane& a, const ImagePlane& b);
// 10 log10(peak^2 / MSE); kPsnrInfinite when MSE is zero.
double psnr(const ImagePlane& a, const ImagePlane& b, double peak = 255.0);

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
  double window_sigma = 1.5;
  int window_radius = 5;
};

struct SsimResult {
  double score = 0.0;
  ImagePlane map;
};

// Gaussian-window SSIM on the full map (reflection padding, no border crop).
SsimResult ssim(const ImagePlane& a, const ImagePlane& b, const SsimParams& params = {});
inline double ssim_score(const ImagePlane& a, const ImagePlane& b, const SsimParams& params = {}) {
  return ssim(a, b, params).score;
}

}  // namespace rqi
