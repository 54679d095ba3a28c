#include "rqi/synth/distortion.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rqi/error.h"
#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/metrics/fr.h"
#include "rqi/util/csv.h"
#include "rqi/util/parallel.h"
#include "rqi/util/rng.h"

namespace rqi {

namespace {

constexpr double kBlurSigma[5] = {0.8, 1.6, 2.6, 4.0, 6.0};
constexpr double kNoiseSigma[5] = {4, 8, 16, 28, 44};
constexpr double kResampleFactor[5] = {1.5, 2, 3, 4, 6};
constexpr double kContrastFactor[5] = {0.85, 0.7, 0.55, 0.4, 0.25};
constexpr double kQuantScale[5] = {2, 4, 8, 16, 32};

constexpr int kJpegLuma[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                               14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                               18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                               49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

template <typename Fn>
ImageBuffer per_channel(const ImageBuffer& img, Fn fn) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int c = 0; c < img.channels(); ++c) store_channel(fn(channel_plane(img, c), c), out, c);
  return out;
}

void check_size(const ImageBuffer& img) {
  if (img.width() < 32 || img.height() < 32) throw DimensionError("distortions need an image of at least 32x32");
}

// Orthonormal 8-point DCT-II basis, cos_table[k][n].
const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto table = [] {
    std::array<std::array<double, 8>, 8> t{};
    for (int k = 0; k < 8; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) t[k][n] = scale * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
    }
    return t;
  }();
  return table;
}

ImagePlane quantize_plane(const ImagePlane& p, double scale) {
  const auto& basis = dct_basis();
  ImagePlane out(p.width(), p.height());
  double block[8][8], tmp[8][8], coef[8][8];
  for (int by = 0; by < p.height(); by += 8) {
    for (int bx = 0; bx < p.width(); bx += 8) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          block[y][x] = p.at(std::min(bx + x, p.width() - 1), std::min(by + y, p.height() - 1)) - 128.0;
        }
      }
      for (int y = 0; y < 8; ++y) {
        for (int k = 0; k < 8; ++k) {
          double s = 0.0;
          for (int x = 0; x < 8; ++x) s += basis[k][x] * block[y][x];
          tmp[y][k] = s;
        }
      }
      for (int ky = 0; ky < 8; ++ky) {
        for (int kx = 0; kx < 8; ++kx) {
          double s = 0.0;
          for (int y = 0; y < 8; ++y) s += basis[ky][y] * tmp[y][kx];
          const double step = scale * kJpegLuma[ky * 8 + kx] / 8.0;
          coef[ky][kx] = std::round(s / step) * step;
        }
      }
      for (int ky = 0; ky < 8; ++ky) {
        for (int x = 0; x < 8; ++x) {
          double s = 0.0;
          for (int kx = 0; kx < 8; ++kx) s += basis[kx][x] * coef[ky][kx];
          tmp[ky][x] = s;
        }
      }
      for (int y = 0; y < 8 && by + y < p.height(); ++y) {
        for (int x = 0; x < 8 && bx + x < p.width(); ++x) {
          double s = 0.0;
          for (int ky = 0; ky < 8; ++ky) s += basis[ky][y] * tmp[ky][x];
          out.at(bx + x, by + y) = s + 128.0;
        }
      }
    }
  }
  return out;
}

}  // namespace

std::string_view family_name(DistortionFamily f) {
  switch (f) {
    case DistortionFamily::kGaussianBlur: return "gaussian-blur";
    case DistortionFamily::kGaussianNoise: return "gaussian-noise";
    case DistortionFamily::kDownscaleUpscale: return "downscale-upscale";
    case DistortionFamily::kContrastCompress: return "contrast-compress";
    case DistortionFamily::kBlockQuantize: return "block-quantize";
  }
  return "";
}

DistortionFamily parse_family(std::string_view name) {
  for (auto f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  throw ValidationError("unknown distortion family '" + std::string(name) + "'");
}

double severity_parameter(DistortionFamily f, int severity) {
  if (severity < 1 || severity > kSeverityLevels) {
    throw ValidationError("severity must be in 1..5, got " + std::to_string(severity));
  }
  const int i = severity - 1;
  switch (f) {
    case DistortionFamily::kGaussianBlur: return kBlurSigma[i];
    case DistortionFamily::kGaussianNoise: return kNoiseSigma[i];
    case DistortionFamily::kDownscaleUpscale: return kResampleFactor[i];
    case DistortionFamily::kContrastCompress: return kContrastFactor[i];
    case DistortionFamily::kBlockQuantize: return kQuantScale[i];
  }
  return 0.0;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  return per_channel(img, [&](const ImagePlane& p, int) { return gaussian_filter(p, sigma, radius); });
}

ImageBuffer add_gaussian_noise(const ImageBuffer& img, double sigma, std::uint64_t seed) {
  SplitMix64 rng(seed);
  ImageBuffer out(img.width(), img.height(), img.channels());
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = to_sample(src[i] + sigma * rng.normal());
  return out;
}

ImageBuffer downscale_upscale(const ImageBuffer& img, double factor) {
  const int w = std::max(1, static_cast<int>(std::lround(img.width() / factor)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height() / factor)));
  return per_channel(img, [&](const ImagePlane& p, int) {
    return resize_bilinear(resize_area(p, w, h), img.width(), img.height());
  });
}

ImageBuffer contrast_compress(const ImageBuffer& img, double factor) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = to_sample(128.0 + factor * (src[i] - 128.0));
  return out;
}

ImageBuffer block_quantize(const ImageBuffer& img, double scale) {
  return per_channel(img, [&](const ImagePlane& p, int) { return quantize_plane(p, scale); });
}

ImageBuffer apply_distortion(const ImageBuffer& img, const DistortionSpec& spec) {
  check_size(img);
  const double v = severity_parameter(spec.family, spec.severity);
  switch (spec.family) {
    case DistortionFamily::kGaussianBlur: return gaussian_blur(img, v);
    case DistortionFamily::kGaussianNoise: return add_gaussian_noise(img, v, spec.seed);
    case DistortionFamily::kDownscaleUpscale: return downscale_upscale(img, v);
    case DistortionFamily::kContrastCompress: return contrast_compress(img, v);
    case DistortionFamily::kBlockQuantize: return block_quantize(img, v);
  }
  return img;
}

double pseudo_mos(const ImagePlane& distorted, const ImagePlane& pristine) {
  const double s = ssim_score(distorted, pristine);
  const double p = psnr(distorted, pristine);
  const double p_term = std::isinf(p) ? 1.0 : std::clamp(p / 50.0, 0.0, 1.0);
  return 100.0 * (0.5 * std::max(0.0, s) + 0.5 * p_term);
}

std::string variant_id(const DistortionSpec& spec) {
  return std::string(family_name(spec.family)) + "-" + std::to_string(spec.severity);
}

DistortedSequence make_sequence(const std::string& content_id, const ImageBuffer& pristine,
                                const std::vector<DistortionFamily>& families, std::uint64_t seed) {
  DistortedSequence seq{content_id, pristine, {}};
  const ImagePlane ref = to_luma(pristine);
  const std::uint64_t content_seed = derive_seed(seed, hash_string(content_id));
  for (DistortionFamily f : families) {
    for (int s = 1; s <= kSeverityLevels; ++s) {
      DistortionSpec spec{f, s, derive_seed(content_seed, static_cast<std::uint64_t>(f) * 16 + s)};
      ImageBuffer img = apply_distortion(pristine, spec);
      const double q = pseudo_mos(to_luma(img), ref);
      seq.variants.push_back({spec, std::move(img), q});
    }
  }
  return seq;
}

std::vector<std::pair<std::string, std::filesystem::path>> list_corpus(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError(dir.string() + ": not a directory");
  std::vector<std::pair<std::string, std::filesystem::path>> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") files.emplace_back(entry.path().stem().string(), entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError(dir.string() + ": no images (.png, .ppm, .pgm)");
  return files;
}

std::vector<DistortedSequence> make_dataset(const std::filesystem::path& corpus,
                                            const std::vector<DistortionFamily>& families, std::uint64_t seed,
                                            int jobs) {
  const auto files = list_corpus(corpus);
  return parallel_map(files.size(), jobs, [&](std::size_t i) {
    return make_sequence(files[i].first, load_image(files[i].second), families, seed);
  });
}

void write_dataset(const std::vector<DistortedSequence>& dataset, const std::filesystem::path& out) {
  CsvTable table;
  table.header = {"content_id", "variant_id", "family", "severity", "path", "pseudo_mos"};
  for (const auto& seq : dataset) {
    const std::filesystem::path dir = out / seq.content_id;
    std::filesystem::create_directories(dir);
    const std::string ref_name = seq.content_id + "/" + kPristineVariant + ".png";
    save_image(seq.pristine, out / ref_name);
    table.rows.push_back({seq.content_id, kPristineVariant, kPristineVariant, "0", ref_name, "100"});
    for (const auto& v : seq.variants) {
      const std::string id = variant_id(v.spec);
      const std::string name = seq.content_id + "/" + id + ".png";
      save_image(v.image, out / name);
      table.rows.push_back({seq.content_id, id, std::string(family_name(v.spec.family)),
                            std::to_string(v.spec.severity), name, format_number(v.pseudo_mos)});
    }
  }
  write_csv(table, out / "manifest.csv");
}

}  // namespace rqi
