#include "rqi/image/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "rqi/error.h"
#include "rqi/util/rng.h"

namespace rqi {

namespace {

// Half-sample symmetric index; valid for i in [-n, 2n).
inline int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

void check_rect(int width, int height, const CropRect& r) {
  if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.x + r.w > width || r.y + r.h > height) {
    throw DimensionError("crop rect (" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
                         std::to_string(r.w) + "," + std::to_string(r.h) + ") outside " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

ImagePlane to_luma(const ImageBuffer& img) {
  ImagePlane out(img.width(), img.height());
  auto src = img.data();
  auto dst = out.data();
  if (img.channels() == 1) {
    std::copy(src.begin(), src.end(), dst.begin());
    return out;
  }
  if (img.channels() != 3) throw DimensionError("to_luma expects 1 or 3 channels");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
  }
  return out;
}

ImagePlane channel_plane(const ImageBuffer& img, int channel) {
  ImagePlane out(img.width(), img.height());
  auto src = img.data();
  auto dst = out.data();
  const int c = img.channels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i * c + channel];
  return out;
}

std::uint8_t to_sample(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

ImageBuffer plane_to_buffer(const ImagePlane& p) {
  ImageBuffer out(p.width(), p.height(), 1);
  auto src = p.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = to_sample(src[i]);
  return out;
}

void store_channel(const ImagePlane& p, ImageBuffer& img, int channel) {
  auto src = p.data();
  auto dst = img.data();
  const int c = img.channels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i * c + channel] = to_sample(src[i]);
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  if (!(sigma > 0.0)) throw DimensionError("gaussian sigma must be positive");
  if (radius < 1) throw DimensionError("gaussian radius must be >= 1");
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    k[t + radius] = std::exp(-(t * t) / (2.0 * sigma * sigma));
    sum += k[t + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

ImagePlane gaussian_filter(const ImagePlane& p, double sigma, int radius) {
  const auto k = gaussian_kernel(sigma, radius);
  const int w = p.width();
  const int h = p.height();
  if (radius >= std::min(w, h)) {
    throw DimensionError("gaussian radius " + std::to_string(radius) + " too large for " +
                         std::to_string(w) + "x" + std::to_string(h));
  }
  ImagePlane tmp(w, h);
  for (int y = 0; y < h; ++y) {
    const double* src = p.row(y);
    double* dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      if (x >= radius && x + radius < w) {
        for (int t = -radius; t <= radius; ++t) acc += k[t + radius] * src[x + t];
      } else {
        for (int t = -radius; t <= radius; ++t) acc += k[t + radius] * src[reflect(x + t, w)];
      }
      dst[x] = acc;
    }
  }
  ImagePlane out(w, h);
  for (int y = 0; y < h; ++y) {
    double* dst = out.row(y);
    for (int t = -radius; t <= radius; ++t) {
      const double* src = tmp.row(reflect(y + t, h));
      const double kt = k[t + radius];
      for (int x = 0; x < w; ++x) dst[x] += kt * src[x];
    }
  }
  return out;
}

ImagePlane downscale_half(const ImagePlane& p) {
  if (p.width() < 2 || p.height() < 2) {
    throw DimensionError("downscale_half needs at least 2x2, got " + std::to_string(p.width()) +
                         "x" + std::to_string(p.height()));
  }
  const int w = p.width() / 2;
  const int h = p.height() / 2;
  ImagePlane out(w, h);
  for (int y = 0; y < h; ++y) {
    const double* r0 = p.row(2 * y);
    const double* r1 = p.row(2 * y + 1);
    double* dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      dst[x] = (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]) * 0.25;
    }
  }
  return out;
}

ImagePlane upsample_replicate(const ImagePlane& p, int factor) {
  if (factor < 1) throw DimensionError("replication factor must be >= 1");
  ImagePlane out(p.width() * factor, p.height() * factor);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.at(x, y) = p.at(x / factor, y / factor);
  }
  return out;
}

ImagePlane resize_area(const ImagePlane& p, int width, int height) {
  if (width < 1 || height < 1 || width > p.width() || height > p.height()) {
    throw DimensionError("resize_area only shrinks");
  }
  // Separable: every output sample integrates the source over its footprint.
  auto weights = [](int src_n, int dst_n) {
    std::vector<std::vector<std::pair<int, double>>> taps(dst_n);
    const double scale = static_cast<double>(src_n) / dst_n;
    for (int o = 0; o < dst_n; ++o) {
      const double lo = o * scale;
      const double hi = (o + 1) * scale;
      for (int i = static_cast<int>(std::floor(lo)); i < std::min(src_n, static_cast<int>(std::ceil(hi))); ++i) {
        const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
        if (overlap > 0) taps[o].emplace_back(i, overlap / scale);
      }
    }
    return taps;
  };
  const auto wx = weights(p.width(), width);
  const auto wy = weights(p.height(), height);
  ImagePlane tmp(width, p.height());
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& [i, wgt] : wx[x]) acc += wgt * p.at(i, y);
      tmp.at(x, y) = acc;
    }
  }
  ImagePlane out(width, height);
  for (int y = 0; y < height; ++y) {
    for (const auto& [j, wgt] : wy[y]) {
      for (int x = 0; x < width; ++x) out.at(x, y) += wgt * tmp.at(x, j);
    }
  }
  return out;
}

ImagePlane resize_bilinear(const ImagePlane& p, int width, int height) {
  if (width < 1 || height < 1) throw DimensionError("resize target must be at least 1x1");
  ImagePlane out(width, height);
  const double sx = static_cast<double>(p.width()) / width;
  const double sy = static_cast<double>(p.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, p.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, p.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, p.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, p.width() - 1);
      const double tx = fx - x0;
      const double top = p.at(x0, y0) * (1 - tx) + p.at(x1, y0) * tx;
      const double bottom = p.at(x0, y1) * (1 - tx) + p.at(x1, y1) * tx;
      out.at(x, y) = top * (1 - ty) + bottom * ty;
    }
  }
  return out;
}

ImagePlane crop(const ImagePlane& p, const CropRect& r) {
  check_rect(p.width(), p.height(), r);
  ImagePlane out(r.w, r.h);
  for (int y = 0; y < r.h; ++y) {
    std::copy_n(p.row(r.y + y) + r.x, r.w, out.row(y));
  }
  return out;
}

ImageBuffer crop(const ImageBuffer& img, const CropRect& r) {
  check_rect(img.width(), img.height(), r);
  ImageBuffer out(r.w, r.h, img.channels());
  const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
  const std::size_t span = static_cast<std::size_t>(r.w) * img.channels();
  for (int y = 0; y < r.h; ++y) {
    const auto* src = img.data().data() + (r.y + y) * stride + static_cast<std::size_t>(r.x) * img.channels();
    std::copy_n(src, span, out.data().data() + y * span);
  }
  return out;
}

CropRect center_crop_rect(int width, int height, int size) {
  const int s = std::min({size, width, height});
  return CropRect{(width - s) / 2, (height - s) / 2, s, s};
}

std::vector<CropRect> random_crops(int width, int height, int size, int count, std::uint64_t seed) {
  if (size < 1 || size > std::min(width, height)) {
    throw DimensionError("crop size " + std::to_string(size) + " exceeds " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  SplitMix64 rng(seed);
  std::vector<CropRect> rects;
  rects.reserve(std::max(count, 0));
  for (int i = 0; i < count; ++i) {
    const int x = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(width - size + 1)));
    const int y = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(height - size + 1)));
    rects.push_back(CropRect{x, y, size, size});
  }
  return rects;
}

std::vector<CropRect> random_crops(const ImagePlane& p, int size, int count, std::uint64_t seed) {
  return random_crops(p.width(), p.height(), size, count, seed);
}

ImagePlane rotate90(const ImagePlane& p) {
  // Counter-clockwise: new (x, y) = old (w - 1 - y, x).
  ImagePlane out(p.height(), p.width());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.at(x, y) = p.at(p.width() - 1 - y, x);
  }
  return out;
}

ImagePlane mirror_horizontal(const ImagePlane& p) {
  ImagePlane out(p.width(), p.height());
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) out.at(x, y) = p.at(p.width() - 1 - x, y);
  }
  return out;
}

ImageBuffer mirror_horizontal(const ImageBuffer& img) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(img.width() - 1 - x, y, c);
    }
  }
  return out;
}

double plane_mean(const ImagePlane& p) {
  double sum = 0.0;
  for (double v : p.data()) sum += v;
  return sum / static_cast<double>(p.size());
}

}  // namespace rqi
