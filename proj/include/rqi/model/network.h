#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rqi/image/image.h"

namespace rqi {

// Fixed architecture. Tower: four 3x3 stride-2 convolutions (padding 1) with
// widths 16/32/64/64 and ReLU, then global average pooling to 64 features.
// Head: [phi(A), phi(B), phi(A) - phi(B)] (192) -> 64 -> 32 -> 1, ReLU on the
// hidden layers and no activation on the output.
inline constexpr int kCropSize = 64;
inline constexpr int kFeatureDim = 64;
inline constexpr int kHeadInput = 3 * kFeatureDim;
inline constexpr std::array<int, 5> kConvChannels = {1, 16, 32, 64, 64};
inline constexpr std::array<int, 4> kHeadWidths = {kHeadInput, 64, 32, 1};

using FeatureVector = std::array<double, kFeatureDim>;

enum class HeadMode : std::uint8_t {
  kAntisymmetric = 0,  // (h(A, B) - h(B, A)) / 2
  kRaw = 1,            // h(A, B)
};

// Pair of crop indices into a feature batch with its training label.
struct PairRef {
  int a = 0;
  int b = 0;
  double label = 0.0;
};

// Parameters are one flat vector in file order: per convolution the weights
// [out][ky][kx][in] then the bias, per dense layer [out][in] then the bias.
class RqiNetwork {
 public:
  RqiNetwork(HeadMode mode, std::uint64_t seed);  // He-normal weights, zero biases
  RqiNetwork(HeadMode mode, std::vector<double> parameters);

  HeadMode mode() const { return mode_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  static std::size_t parameter_count();
  // u32 layer-shape list written into model files.
  static std::vector<std::uint32_t> architecture();

  // Crops must be kCropSize x kCropSize with samples already scaled to [0, 1];
  // ShapeError otherwise.
  std::vector<FeatureVector> features(std::span<const ImagePlane* const> crops) const;
  double head(const FeatureVector& a, const FeatureVector& b) const;
  double forward(const ImagePlane& a, const ImagePlane& b) const;

  // Mean squared error over `pairs` of crops, and its gradient (same layout as
  // parameters(), overwritten) when `gradient` is non-null.
  double loss(std::span<const ImagePlane* const> crops, std::span<const PairRef> pairs,
              std::vector<double>* gradient) const;

 private:
  HeadMode mode_;
  std::vector<double> params_;
};

}  // namespace rqi
