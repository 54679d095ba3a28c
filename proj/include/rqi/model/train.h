#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rqi/model/network.h"
#include "rqi/model/pairs.h"
#include "rqi/model/rqi.h"

namespace rqi {

struct TrainConfig {
  int crop_size = kCropSize;
  int batch_size = 32;
  int epochs = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
  HeadMode head = HeadMode::kAntisymmetric;
  // Training crops come from pyramid levels 0 .. scales-1 that fit a crop.
  int scales = 3;
  // Fixed aligned rects per validation content and level.
  int validation_crops = 4;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  int batches = 0;
};

struct TrainResult {
  RqiModel model;  // checkpoint with the lowest validation loss
  int best_epoch = 0;
  std::vector<EpochStats> history;
  std::vector<std::string> train_contents;
  std::vector<std::string> validation_contents;
};

// Contents are split by id (validation_fraction of them, at least one each
// side). Each epoch visits every training pair once in batches of pairs from
// one content that share one aligned crop (random level and position).
// Deterministic in config.seed. DivergenceError on a non-finite loss.
TrainResult train_rqi(std::span<const LabeledSequence> data, PairMode mode, const TrainConfig& config,
                      const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace rqi
