#include "rqi/model/train.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "rqi/error.h"
#include "rqi/image/ops.h"
#include "rqi/util/rng.h"

namespace rqi {

AdamOptimizer::AdamOptimizer(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

namespace {

struct Content {
  const LabeledSequence* seq;
  std::vector<std::vector<ImagePlane>> pyramids;  // [image][level], scaled to [0, 1]
  int levels = 0;                                  // usable levels
};

Content prepare(const LabeledSequence& seq, int scales, int crop_size) {
  Content c{&seq, {}, 0};
  const ImagePlane& first = seq.luma.at(0);
  for (int l = 0; l < scales; ++l) {
    if (std::min(first.width() >> l, first.height() >> l) >= crop_size) c.levels = l + 1;
  }
  if (c.levels == 0) {
    throw ProtocolError("content " + seq.labels.content_id + " is smaller than the training crop");
  }
  for (const auto& luma : seq.luma) c.pyramids.push_back(normalized_pyramid(luma, c.levels));
  return c;
}

struct Batch {
  int content;
  std::vector<PairSample> pairs;
};

// Loss of one batch: crops every distinct image once at a shared rect.
double run_batch(const RqiNetwork& net, const Content& c, const std::vector<PairSample>& pairs, int level,
                 const CropRect& rect, std::vector<double>* grad) {
  std::map<int, int> slot;
  std::vector<ImagePlane> crops;
  std::vector<PairRef> refs;
  auto index = [&](int image) {
    auto [it, fresh] = slot.try_emplace(image, static_cast<int>(crops.size()));
    if (fresh) crops.push_back(crop(c.pyramids[image][level], rect));
    return it->second;
  };
  for (const auto& p : pairs) {
    const int a = index(p.index_a);
    const int b = index(p.index_b);
    refs.push_back({a, b, p.label});
  }
  std::vector<const ImagePlane*> ptrs;
  for (const auto& cr : crops) ptrs.push_back(&cr);
  return net.loss(ptrs, refs, grad);
}

struct ValidationSet {
  // Per content: features are recomputed each epoch on these rects.
  std::vector<std::vector<std::pair<int, CropRect>>> rects;
  std::vector<std::vector<PairSample>> pairs;
};

double validation_loss(const RqiNetwork& net, const std::vector<Content>& contents, const ValidationSet& vs) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < contents.size(); ++k) {
    const Content& c = contents[k];
    const std::size_t n = c.pyramids.size();
    for (const auto& [level, rect] : vs.rects[k]) {
      std::vector<ImagePlane> crops;
      for (std::size_t i = 0; i < n; ++i) crops.push_back(crop(c.pyramids[i][level], rect));
      std::vector<const ImagePlane*> ptrs;
      for (const auto& cr : crops) ptrs.push_back(&cr);
      const auto feats = net.features(ptrs);
      for (const auto& p : vs.pairs[k]) {
        const double err = net.head(feats[p.index_a], feats[p.index_b]) - p.label;
        total += err * err;
        ++count;
      }
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

TrainResult train_rqi(std::span<const LabeledSequence> data, PairMode mode, const TrainConfig& config,
                      const std::function<void(const EpochStats&)>& on_epoch) {
  if (data.size() < 2) throw InsufficientData("training needs at least two contents (train and validation)");
  if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
    throw ValidationError("validation fraction must lie in (0, 1)");
  }
  if (config.crop_size != kCropSize) throw ShapeError("training crop size must be " + std::to_string(kCropSize));
  if (config.batch_size < 1 || config.epochs < 1) throw ValidationError("batch size and epochs must be positive");

  std::vector<SequenceLabels> all_labels;
  for (const auto& s : data) all_labels.push_back(s.labels);
  const double q_range = quality_range(all_labels);

  // Split by content id.
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return data[a].labels.content_id < data[b].labels.content_id; });
  SplitMix64 split_rng(derive_seed(config.seed, hash_string("split")));
  split_rng.shuffle(std::span(order));
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(config.validation_fraction * static_cast<double>(data.size()))), 1,
      data.size() - 1);

  TrainResult result;
  std::vector<Content> train, val;
  std::vector<SequenceLabels> train_labels, val_labels;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const LabeledSequence& s = data[order[k]];
    if (k < n_val) {
      val.push_back(prepare(s, config.scales, config.crop_size));
      val_labels.push_back(s.labels);
      result.validation_contents.push_back(s.labels.content_id);
    } else {
      train.push_back(prepare(s, config.scales, config.crop_size));
      train_labels.push_back(s.labels);
      result.train_contents.push_back(s.labels.content_id);
    }
  }

  const auto train_pairs = build_pairs(train_labels, mode, q_range);
  std::vector<std::vector<PairSample>> by_content(train.size());
  for (const auto& p : train_pairs) by_content[p.sequence].push_back(p);

  ValidationSet vs;
  vs.pairs.resize(val.size());
  for (const auto& p : build_pairs(val_labels, mode, q_range)) vs.pairs[p.sequence].push_back(p);
  for (std::size_t k = 0; k < val.size(); ++k) {
    std::vector<std::pair<int, CropRect>> rects;
    for (int l = 0; l < val[k].levels; ++l) {
      const ImagePlane& p = val[k].pyramids[0][l];
      for (const auto& r : random_crops(p.width(), p.height(), config.crop_size, config.validation_crops,
                                        derive_seed(config.seed, hash_string(val_labels[k].content_id) + l))) {
        rects.emplace_back(l, r);
      }
    }
    vs.rects.push_back(std::move(rects));
  }

  RqiNetwork net(config.head, derive_seed(config.seed, hash_string("init")));
  AdamOptimizer adam(net.parameters().size(), config.learning_rate, config.beta1, config.beta2, config.epsilon);
  std::vector<double> grad;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_params;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    SplitMix64 rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::vector<Batch> batches;
    for (std::size_t k = 0; k < train.size(); ++k) {
      auto pairs = by_content[k];
      rng.shuffle(std::span(pairs));
      for (std::size_t at = 0; at < pairs.size(); at += static_cast<std::size_t>(config.batch_size)) {
        const auto end = std::min(pairs.size(), at + static_cast<std::size_t>(config.batch_size));
        batches.push_back({static_cast<int>(k), {pairs.begin() + at, pairs.begin() + end}});
      }
    }
    rng.shuffle(std::span(batches));
    double sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Content& c = train[batches[b].content];
      const int level = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(c.levels)));
      const ImagePlane& ref = c.pyramids[0][level];
      const CropRect rect = random_crops(ref.width(), ref.height(), config.crop_size, 1, rng.next())[0];
      const double loss = run_batch(net, c, batches[b].pairs, level, rect, &grad);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b + 1) + " (loss " + std::to_string(loss) + ")");
      }
      sum += loss;
      adam.step(net.parameters(), grad);
    }
    EpochStats stats{epoch, batches.empty() ? 0.0 : sum / static_cast<double>(batches.size()),
                     validation_loss(net, val, vs), static_cast<int>(batches.size())};
    if (!std::isfinite(stats.validation_loss)) {
      throw DivergenceError("validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.history.push_back(stats);
    if (stats.validation_loss < best) {
      best = stats.validation_loss;
      best_params.assign(net.parameters().begin(), net.parameters().end());
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(stats);
  }
  result.model = RqiModel{RqiNetwork(config.head, std::move(best_params)), q_range};
  return result;
}

}  // namespace rqi
