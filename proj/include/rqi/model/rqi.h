#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rqi/image/image.h"
#include "rqi/model/network.h"
#include "rqi/model/pairs.h"

namespace rqi {

struct RqiModel {
  RqiNetwork network{HeadMode::kAntisymmetric, 0};
  double label_range = 1.0;  // quality range used to normalize training labels
};

// Little-endian: "RQI1", u32 version (1), u8 mode, f64 label_range, u32 count
// then that many u32 architecture entries (crop size, tower channels, head
// widths), then every parameter as f64 in RqiNetwork order.
void save_rqi_model(const RqiModel& model, const std::filesystem::path& path);
RqiModel load_rqi_model(const std::filesystem::path& path);

struct InferenceProtocol {
  int scales = 3;
  int crops_per_scale = 20;
  int crop_size = kCropSize;
  std::uint64_t seed = 0;
};

struct LevelPlan {
  int level = 0;  // number of downscale_half steps
  int width = 0;
  int height = 0;
  std::vector<CropRect> rects;
};

// Levels whose smaller side is below crop_size are skipped; the rects of level
// l come from random_crops with seed derive_seed(protocol.seed, l).
std::vector<LevelPlan> plan_crops(int width, int height, const InferenceProtocol& protocol);

// Luma scaled to [0, 1] and downscaled `levels - 1` times.
std::vector<ImagePlane> normalized_pyramid(const ImagePlane& luma, int levels);

// Network features of every planned crop, in plan order. ProtocolError if no
// level admits a crop; ShapeError if crop_size differs from the network's.
std::vector<FeatureVector> protocol_features(const RqiNetwork& net, const ImagePlane& luma,
                                             const InferenceProtocol& protocol);

// Mean head output over aligned crops (equal-length feature lists).
double score_features(const RqiNetwork& net, std::span<const FeatureVector> target,
                      std::span<const FeatureVector> reference);

// Positive when target is better than reference. DimensionError when sizes differ.
double rqi_score(const RqiModel& model, const ImageBuffer& target, const ImageBuffer& reference,
                 const InferenceProtocol& protocol);
double rqi_score(const RqiModel& model, const ImagePlane& target_luma, const ImagePlane& reference_luma,
                 const InferenceProtocol& protocol);

struct HeldoutReport {
  double sign_accuracy = 0.0;  // over ordered pairs with |q_a - q_b| >= min_gap
  std::size_t sign_pairs = 0;
  double mean_srcc = 0.0;              // mean over contents of the next vector
  std::vector<double> content_srcc;    // SRCC(rqi(variant, pristine), q(variant))
};

// Features are computed once per image and reused for every pair.
HeldoutReport evaluate_heldout(const RqiModel& model, std::span<const LabeledSequence> sequences,
                               const InferenceProtocol& protocol, double min_gap = 5.0, int jobs = 1);

double evaluate_sign_accuracy(const RqiModel& model, std::span<const LabeledSequence> sequences,
                              const InferenceProtocol& protocol);

}  // namespace rqi
