#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rqi/image/image.h"
#include "rqi/synth/distortion.h"

namespace rqi {

enum class PairMode { kArbitrary, kFrStyle, kSingleDistortion };

std::string_view pair_mode_name(PairMode m);  // "arbitrary", "fr", "single"
PairMode parse_pair_mode(std::string_view name);

struct VariantLabel {
  std::string variant_id;
  std::string family;  // "pristine" for the reference image
  double quality = 0.0;
};

// Quality labels of one content; images[0] is the pristine reference.
struct SequenceLabels {
  std::string content_id;
  std::vector<VariantLabel> images;
};

// One content with its images (luma, 0..255) aligned with labels.images.
struct LabeledSequence {
  SequenceLabels labels;
  std::vector<ImagePlane> luma;
};

LabeledSequence labeled_sequence(const DistortedSequence& seq);

// Reads a synth manifest (content_id, variant_id, family, severity, path and
// pseudo_mos or mos). Each content needs exactly one "pristine" row.
std::vector<LabeledSequence> load_labeled_manifest(const std::filesystem::path& manifest);

struct PairSample {
  std::string content_id;
  std::string image_a;
  std::string image_b;
  double label = 0.0;
  // Positions into the input sequences, for fast lookup.
  int sequence = 0;
  int index_a = 0;
  int index_b = 0;
};

// max q - min q over every image of every sequence.
double quality_range(std::span<const SequenceLabels> sequences);

// Label = clamp((q_a - q_b) / q_range, -1, 1).
// arbitrary: every ordered (i, j), i != j; fr: (I_i, I_0) for i >= 1;
// single: arbitrary restricted to equal family or either side pristine.
// Output is in canonical order (sequence, a, b); training shuffles it.
// EmptyInput if there are no sequences.
std::vector<PairSample> build_pairs(std::span<const SequenceLabels> sequences, PairMode mode, double q_range);
std::vector<PairSample> build_pairs(std::span<const SequenceLabels> sequences, PairMode mode);

}  // namespace rqi
