#include "rqi/synth/corpus.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/util/rng.h"

namespace rqi {

namespace {

ImagePlane white_noise(int w, int h, SplitMix64& rng) {
  ImagePlane p(w, h);
  for (double& v : p.data()) v = rng.normal();
  return p;
}

void normalize(ImagePlane& p) {
  double mean = plane_mean(p);
  double var = 0.0;
  for (double v : p.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(p.size()));
  for (double& v : p.data()) v = (v - mean) / (sd > 0 ? sd : 1.0);
}

// Octaves of smoothed noise with amplitude growing with scale (roughly 1/f).
ImagePlane fractal_texture(int w, int h, SplitMix64& rng, double roughness) {
  ImagePlane acc(w, h, 0.0);
  const int max_radius = std::min(w, h) - 1;
  for (int o = 0; o < 6; ++o) {
    const double sigma = 0.6 * std::pow(2.0, o);
    const int radius = std::min(max_radius, static_cast<int>(std::ceil(3.0 * sigma)));
    ImagePlane layer = gaussian_filter(white_noise(w, h, rng), sigma, radius);
    normalize(layer);
    const double amp = std::pow(2.0, o * roughness);
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += amp * layer.data()[i];
  }
  normalize(acc);
  return acc;
}

struct Shape {
  bool ellipse;
  double cx, cy, rx, ry, angle;
  double color[3];
  double texture_gain;
};

bool inside(const Shape& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  const double c = std::cos(s.angle), sn = std::sin(s.angle);
  const double u = (c * dx + sn * dy) / s.rx;
  const double v = (-sn * dx + c * dy) / s.ry;
  return s.ellipse ? u * u + v * v <= 1.0 : std::fabs(u) <= 1.0 && std::fabs(v) <= 1.0;
}

}  // namespace

ImageBuffer synthetic_content(std::uint64_t seed, int width, int height) {
  SplitMix64 rng(seed);
  const ImagePlane base = fractal_texture(width, height, rng, 0.35 + 0.3 * rng.uniform());
  const ImagePlane detail = fractal_texture(width, height, rng, 0.1);
  ImagePlane tint[3] = {fractal_texture(width, height, rng, 1.2), fractal_texture(width, height, rng, 1.2),
                        fractal_texture(width, height, rng, 1.2)};

  double bg[3];
  for (double& c : bg) c = 70.0 + 110.0 * rng.uniform();
  const double base_gain = 25.0 + 20.0 * rng.uniform();

  std::vector<Shape> shapes(5 + rng.bounded(8));
  for (auto& s : shapes) {
    s.ellipse = rng.uniform() < 0.5;
    s.cx = width * rng.uniform();
    s.cy = height * rng.uniform();
    s.rx = 6.0 + 0.25 * width * rng.uniform();
    s.ry = 6.0 + 0.25 * height * rng.uniform();
    s.angle = 3.14159265358979 * rng.uniform();
    for (double& c : s.color) c = 20.0 + 215.0 * rng.uniform();
    s.texture_gain = 4.0 + 16.0 * rng.uniform();
  }

  ImagePlane channels[3] = {ImagePlane(width, height), ImagePlane(width, height), ImagePlane(width, height)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double rgb[3];
      double gain = base_gain;
      for (int c = 0; c < 3; ++c) rgb[c] = bg[c] + 15.0 * tint[c].at(x, y);
      for (const auto& s : shapes) {
        if (inside(s, x + 0.5, y + 0.5)) {
          for (int c = 0; c < 3; ++c) rgb[c] = s.color[c] + 6.0 * tint[c].at(x, y);
          gain = s.texture_gain;
        }
      }
      const double t = gain * base.at(x, y) + 4.0 * detail.at(x, y);
      for (int c = 0; c < 3; ++c) channels[c].at(x, y) = rgb[c] + t;
    }
  }
  ImageBuffer out(width, height, 3);
  for (int c = 0; c < 3; ++c) {
    // Slight optical softening so edges are not aliased steps.
    store_channel(gaussian_filter(channels[c], 0.5, 2), out, c);
  }
  return out;
}

void write_synthetic_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed, int width, int height) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    std::string name = std::to_string(i);
    if (name.size() < 2) name.insert(0, 2 - name.size(), '0');
    save_image(synthetic_content(derive_seed(seed, static_cast<std::uint64_t>(i)), width, height),
               dir / ("content_" + name + ".png"));
  }
}

}  // namespace rqi
