#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rqi/image/image.h"

namespace rqi {

enum class DistortionFamily { kGaussianBlur, kGaussianNoise, kDownscaleUpscale, kContrastCompress, kBlockQuantize };

inline constexpr std::array<DistortionFamily, 5> kAllFamilies = {
    DistortionFamily::kGaussianBlur, DistortionFamily::kGaussianNoise, DistortionFamily::kDownscaleUpscale,
    DistortionFamily::kContrastCompress, DistortionFamily::kBlockQuantize};
inline constexpr int kSeverityLevels = 5;

std::string_view family_name(DistortionFamily f);
// Throws ValidationError on an unknown tag.
DistortionFamily parse_family(std::string_view name);

struct DistortionSpec {
  DistortionFamily family = DistortionFamily::kGaussianBlur;
  int severity = 1;  // 1..5
  std::uint64_t seed = 0;
};

// Ladder parameter for a family and severity: blur sigma, noise sigma,
// resampling factor, contrast factor or DCT quantization scale.
double severity_parameter(DistortionFamily f, int severity);

// Same dimensions and channels as the input; requires at least 32x32.
ImageBuffer apply_distortion(const ImageBuffer& img, const DistortionSpec& spec);

// Individual distortions with explicit parameters (per channel, rounded to
// 8 bits at the end).
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);
ImageBuffer add_gaussian_noise(const ImageBuffer& img, double sigma, std::uint64_t seed);
ImageBuffer downscale_upscale(const ImageBuffer& img, double factor);
// x -> 128 + factor (x - 128).
ImageBuffer contrast_compress(const ImageBuffer& img, double factor);
// 8x8 orthonormal DCT; coefficient k quantized with step scale * Q_k / 8,
// Q the standard JPEG luminance table. Border blocks use replicated edges.
ImageBuffer block_quantize(const ImageBuffer& img, double scale);

// 100 (0.5 max(0, ssim) + 0.5 clamp(psnr / 50, 0, 1)); infinite PSNR counts as 1.
double pseudo_mos(const ImagePlane& distorted, const ImagePlane& pristine);

struct DistortedVariant {
  DistortionSpec spec;
  ImageBuffer image;
  double pseudo_mos = 0.0;
};

struct DistortedSequence {
  std::string content_id;
  ImageBuffer pristine;
  std::vector<DistortedVariant> variants;
};

inline const std::string kPristineVariant = "pristine";
// "<family>-<severity>", e.g. "gaussian-blur-3".
std::string variant_id(const DistortionSpec& spec);

// Noise seeds come from (seed, content_id, family, severity) so the result does
// not depend on processing order.
DistortedSequence make_sequence(const std::string& content_id, const ImageBuffer& pristine,
                                const std::vector<DistortionFamily>& families, std::uint64_t seed);

// Image files (.png, .ppm, .pgm) of a directory in name order; the content id
// is the file stem. Throws IoError if the directory has none.
std::vector<std::pair<std::string, std::filesystem::path>> list_corpus(const std::filesystem::path& dir);

std::vector<DistortedSequence> make_dataset(const std::filesystem::path& corpus,
                                            const std::vector<DistortionFamily>& families, std::uint64_t seed,
                                            int jobs = 1);

// Writes <out>/<content>/<variant>.png and <out>/manifest.csv with header
// content_id,variant_id,family,severity,path,pseudo_mos. The pristine image is
// listed with family "pristine", severity 0 and score 100.
void write_dataset(const std::vector<DistortedSequence>& dataset, const std::filesystem::path& out);

}  // namespace rqi
