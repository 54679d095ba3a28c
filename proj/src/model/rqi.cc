#include "rqi/model/rqi.h"

#include <cmath>
#include <cstring>

#include "rqi/error.h"
#include "rqi/image/ops.h"
#include "rqi/stats/correlation.h"
#include "rqi/util/file.h"
#include "rqi/util/parallel.h"
#include "rqi/util/rng.h"

namespace rqi {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}
  std::uint64_t take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError(name_ + ": truncated RQI1 model");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  double f64() {
    const std::uint64_t bits = take(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_rqi_model(const RqiModel& model, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out{'R', 'Q', 'I', '1'};
  put_u32(out, kFormatVersion);
  out.push_back(static_cast<std::uint8_t>(model.network.mode()));
  put_f64(out, model.label_range);
  const auto arch = RqiNetwork::architecture();
  put_u32(out, static_cast<std::uint32_t>(arch.size()));
  for (auto v : arch) put_u32(out, v);
  for (double w : model.network.parameters()) put_f64(out, w);
  write_file_bytes(path, out);
}

RqiModel load_rqi_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string name = path.string();
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "RQI1", 4) != 0) throw FormatError(name + ": not an RQI1 model");
  Reader in(std::span<const std::uint8_t>(bytes).subspan(4), name);
  const auto version = in.take(4);
  if (version != kFormatVersion) throw FormatError(name + ": unsupported model version " + std::to_string(version));
  const auto mode = in.take(1);
  if (mode > 1) throw FormatError(name + ": unknown head mode " + std::to_string(mode));
  const double range = in.f64();
  const auto count = in.take(4);
  std::vector<std::uint32_t> arch;
  for (std::uint64_t i = 0; i < count; ++i) arch.push_back(static_cast<std::uint32_t>(in.take(4)));
  if (arch != RqiNetwork::architecture()) throw ShapeError(name + ": architecture does not match this build");
  std::vector<double> params(RqiNetwork::parameter_count());
  for (double& w : params) w = in.f64();
  if (!in.done()) throw FormatError(name + ": trailing bytes in RQI1 model");
  if (!(range > 0.0) || !std::isfinite(range)) throw FormatError(name + ": label range must be positive");
  return RqiModel{RqiNetwork(static_cast<HeadMode>(mode), std::move(params)), range};
}

std::vector<LevelPlan> plan_crops(int width, int height, const InferenceProtocol& protocol) {
  if (protocol.scales < 1) throw ValidationError("protocol needs at least one scale");
  if (protocol.crops_per_scale < 1) throw ValidationError("protocol needs at least one crop per scale");
  std::vector<LevelPlan> plan;
  for (int l = 0; l < protocol.scales; ++l) {
    const int w = width >> l, h = height >> l;
    if (std::min(w, h) < protocol.crop_size) continue;
    plan.push_back({l, w, h,
                    random_crops(w, h, protocol.crop_size, protocol.crops_per_scale,
                                 derive_seed(protocol.seed, static_cast<std::uint64_t>(l)))});
  }
  return plan;
}

std::vector<ImagePlane> normalized_pyramid(const ImagePlane& luma, int levels) {
  std::vector<ImagePlane> out;
  ImagePlane p = luma;
  for (double& v : p.data()) v /= 255.0;
  out.push_back(std::move(p));
  for (int l = 1; l < levels; ++l) {
    if (std::min(out.back().width(), out.back().height()) < 2) break;
    out.push_back(downscale_half(out.back()));
  }
  return out;
}

std::vector<FeatureVector> protocol_features(const RqiNetwork& net, const ImagePlane& luma,
                                             const InferenceProtocol& protocol) {
  if (protocol.crop_size != kCropSize) {
    throw ShapeError("protocol crop size " + std::to_string(protocol.crop_size) + " differs from the network's " +
                     std::to_string(kCropSize));
  }
  const auto plan = plan_crops(luma.width(), luma.height(), protocol);
  if (plan.empty()) {
    throw ProtocolError("image " + std::to_string(luma.width()) + "x" + std::to_string(luma.height()) +
                        " is smaller than the " + std::to_string(protocol.crop_size) + "-pixel crop at every scale");
  }
  const auto levels = normalized_pyramid(luma, plan.back().level + 1);
  std::vector<ImagePlane> crops;
  for (const auto& lp : plan) {
    for (const auto& r : lp.rects) crops.push_back(crop(levels[lp.level], r));
  }
  std::vector<const ImagePlane*> ptrs;
  for (const auto& c : crops) ptrs.push_back(&c);
  return net.features(ptrs);
}

double score_features(const RqiNetwork& net, std::span<const FeatureVector> target,
                      std::span<const FeatureVector> reference) {
  if (target.size() != reference.size() || target.empty()) {
    throw DimensionError("aligned crop lists must be non-empty and of equal length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) sum += net.head(target[i], reference[i]);
  return sum / static_cast<double>(target.size());
}

double rqi_score(const RqiModel& model, const ImagePlane& target_luma, const ImagePlane& reference_luma,
                 const InferenceProtocol& protocol) {
  if (target_luma.width() != reference_luma.width() || target_luma.height() != reference_luma.height()) {
    throw DimensionError("rqi_score: target and reference differ in size");
  }
  const auto t = protocol_features(model.network, target_luma, protocol);
  const auto r = protocol_features(model.network, reference_luma, protocol);
  return score_features(model.network, t, r);
}

double rqi_score(const RqiModel& model, const ImageBuffer& target, const ImageBuffer& reference,
                 const InferenceProtocol& protocol) {
  if (target.width() != reference.width() || target.height() != reference.height()) {
    throw DimensionError("rqi_score: target and reference differ in size");
  }
  return rqi_score(model, to_luma(target), to_luma(reference), protocol);
}

HeldoutReport evaluate_heldout(const RqiModel& model, std::span<const LabeledSequence> sequences,
                               const InferenceProtocol& protocol, double min_gap, int jobs) {
  struct Ref {
    std::size_t seq, img;
  };
  std::vector<Ref> refs;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    for (std::size_t i = 0; i < sequences[s].luma.size(); ++i) refs.push_back({s, i});
  }
  const auto feats = parallel_map(refs.size(), jobs, [&](std::size_t k) {
    return protocol_features(model.network, sequences[refs[k].seq].luma[refs[k].img], protocol);
  });
  HeldoutReport report;
  std::size_t correct = 0;
  std::size_t at = 0;
  for (const auto& seq : sequences) {
    const std::size_t n = seq.luma.size();
    const auto& images = seq.labels.images;
    std::vector<double> scores, quality;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        const double gap = images[a].quality - images[b].quality;
        const bool counted = std::fabs(gap) >= min_gap;
        const bool versus_pristine = b == 0;
        if (!counted && !versus_pristine) continue;
        const double s = score_features(model.network, feats[at + a], feats[at + b]);
        if (counted) {
          ++report.sign_pairs;
          correct += (s > 0) == (gap > 0) && s != 0.0;
        }
        if (versus_pristine) {
          scores.push_back(s);
          quality.push_back(images[a].quality);
        }
      }
    }
    try {
      if (scores.size() >= 3) report.content_srcc.push_back(srcc(scores, quality));
    } catch (const DegenerateInput&) {
      // A constant score vector has no rank order; the content is skipped.
    }
    at += n;
  }
  if (report.sign_pairs > 0) report.sign_accuracy = static_cast<double>(correct) / report.sign_pairs;
  if (!report.content_srcc.empty()) {
    double sum = 0.0;
    for (double v : report.content_srcc) sum += v;
    report.mean_srcc = sum / static_cast<double>(report.content_srcc.size());
  }
  return report;
}

double evaluate_sign_accuracy(const RqiModel& model, std::span<const LabeledSequence> sequences,
                              const InferenceProtocol& protocol) {
  return evaluate_heldout(model, sequences, protocol).sign_accuracy;
}

}  // namespace rqi
