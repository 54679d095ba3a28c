#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rqi/model/rqi.h"

namespace rqi {

// Mini super-resolution benchmark built from a pristine corpus:
//   gt      the pristine image after a blur or downscale-upscale degradation
//           (severity 0..5, 0 keeps it pristine), balanced over contents
//   sharp   pristine plus light Gaussian noise: better than its own GT
//   blurry  downscale_upscale(gt, 2): close to the GT, but worse than it
// Every content gets PSNR, SSIM (vs. gt), NIQE and RQI(output, gt) scores;
// GT quality is -NIQE(gt). The discard sweep and random control run on that
// table.
struct DemoConfig {
  std::filesystem::path corpus;
  std::filesystem::path out;
  std::uint64_t seed = 1;
  int jobs = 1;
  // RQI training on the default synthetic dataset of the first
  // `train_contents` corpus images (arbitrary pairs).
  int train_contents = 20;
  int epochs = 8;
  // Use this model file instead of training when set.
  std::filesystem::path model_path;
  double sharp_noise_sigma = 2.0;
  double blurry_factor = 2.0;
  int niqe_patch = 32;
  int control_trials = 200;
  InferenceProtocol protocol{};
  std::function<void(const std::string&)> log;
};

struct DemoReport {
  int n_contents = 0;
  int low_quality_contents = 0;  // lower half by gt quality
  double psnr_prefers_blurry_low = 0.0;  // fraction of low-quality contents
  double ssim_prefers_blurry_low = 0.0;
  double rqi_prefers_sharp = 0.0;         // fraction of all contents
  double rqi_prefers_sharp_heldout = 0.0;  // contents not used for training
  double ssim_gap_start = 0.0;  // mean ssim(blurry) - mean ssim(sharp) at 0 %
  double ssim_gap_end = 0.0;    // same at the last fraction (80 %)
  bool ssim_gap_narrows_monotonically = false;
  // Largest |control mean(f) - mean(0)| / control std(f) over SSIM and PSNR
  // curves of both models and every fraction with nonzero std.
  double control_max_deviation_std = 0.0;
  int best_epoch = 0;
};

// Writes benchmark images, metrics.csv, gt_quality.csv, the sweep artifacts
// under out/sweep, training.csv (when training) and summary.csv. Throws
// IoError on file problems. Deterministic in the config.
DemoReport run_demo(const DemoConfig& config);

}  // namespace rqi
