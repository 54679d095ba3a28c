#include "rqi/metrics/fr.h"

#include <cmath>
#include <string>

#include "rqi/error.h"
#include "rqi/image/ops.h"

namespace rqi {

namespace {

void require_same_shape(const ImagePlane& a, const ImagePlane& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(what) + ": dimension mismatch " + std::to_string(a.width()) +
                         "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                         "x" + std::to_string(b.height()));
  }
}

ImagePlane product(const ImagePlane& a, const ImagePlane& b) {
  ImagePlane out(a.width(), a.height());
  auto pa = a.data();
  auto pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] * pb[i];
  return out;
}

}  // namespace

double mse(const ImagePlane& a, const ImagePlane& b) {
  require_same_shape(a, b, "mse");
  auto pa = a.data();
  auto pb = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pa.size());
}

double psnr(const ImagePlane& a, const ImagePlane& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (!(peak > 0.0)) throw DimensionError("psnr: peak must be positive");
  const double err = mse(a, b);
  if (err == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(peak * peak / err);
}

SsimResult ssim(const ImagePlane& a, const ImagePlane& b, const SsimParams& params) {
  require_same_shape(a, b, "ssim");
  const double sigma = params.window_sigma;
  const int radius = params.window_radius;
  if (std::min(a.width(), a.height()) < 2 * radius + 1) {
    throw DimensionError("ssim: image smaller than the " + std::to_string(2 * radius + 1) +
                         "-pixel window");
  }
  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);

  const ImagePlane mu_a = gaussian_filter(a, sigma, radius);
  const ImagePlane mu_b = gaussian_filter(b, sigma, radius);
  const ImagePlane e_aa = gaussian_filter(product(a, a), sigma, radius);
  const ImagePlane e_bb = gaussian_filter(product(b, b), sigma, radius);
  const ImagePlane e_ab = gaussian_filter(product(a, b), sigma, radius);

  SsimResult result{0.0, ImagePlane(a.width(), a.height())};
  auto map = result.map.data();
  double total = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double ma = mu_a.data()[i];
    const double mb = mu_b.data()[i];
    const double var_a = e_aa.data()[i] - ma * ma;
    const double var_b = e_bb.data()[i] - mb * mb;
    const double cov = e_ab.data()[i] - ma * mb;
    const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
    const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
    map[i] = num / den;
    total += map[i];
  }
  result.score = total / static_cast<double>(map.size());
  return result;
}

}  // namespace rqi
