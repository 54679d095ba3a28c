#include "rqi/demo/demo.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "rqi/error.h"
#include "rqi/gt/sweep.h"
#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/metrics/fr.h"
#include "rqi/metrics/niqe.h"
#include "rqi/model/train.h"
#include "rqi/synth/distortion.h"
#include "rqi/tables.h"
#include "rqi/util/csv.h"
#include "rqi/util/parallel.h"
#include "rqi/util/rng.h"

namespace rqi {
namespace {

struct GtSpec {
  DistortionFamily family;
  int severity;  // 0 keeps the pristine image
};

// Severities 0..5 in equal shares (remainder from the top), each content's
// family drawn from {blur, downscale-upscale}, shuffled with the seed.
std::vector<GtSpec> assign_gt_specs(std::size_t n, std::uint64_t seed) {
  std::vector<GtSpec> specs;
  SplitMix64 rng(derive_seed(seed, hash_string("gt-degradation")));
  for (std::size_t i = 0; i < n; ++i) {
    const auto family = rng.bounded(2) == 0 ? DistortionFamily::kGaussianBlur : DistortionFamily::kDownscaleUpscale;
    specs.push_back(GtSpec{family, static_cast<int>(5 - i % 6)});
  }
  rng.shuffle(std::span<GtSpec>(specs));
  return specs;
}

struct ContentScores {
  double gt_niqe = 0.0;
  double psnr[2] = {0, 0};  // [sharp, blurry]
  double ssim[2] = {0, 0};
  double niqe[2] = {0, 0};
  double rqi[2] = {0, 0};
};

void say(const DemoConfig& c, const std::string& msg) {
  if (c.log) c.log(msg);
}

}  // namespace

DemoReport run_demo(const DemoConfig& config) {
  const auto files = list_corpus(config.corpus);
  const std::size_t n = files.size();
  if (n < 10) throw InsufficientData("the demo needs at least 10 corpus images");
  if (config.model_path.empty() && (config.train_contents < 2 || static_cast<std::size_t>(config.train_contents) > n)) {
    throw ValidationError("train_contents must be between 2 and the corpus size");
  }
  const std::filesystem::path bench = config.out / "benchmark";
  std::error_code ec;
  std::filesystem::create_directories(bench, ec);
  if (ec) throw IoError("cannot create " + bench.string() + ": " + ec.message());

  std::vector<ImageBuffer> pristine;
  std::vector<ImagePlane> pristine_luma;
  for (const auto& [id, path] : files) {
    pristine.push_back(load_image(path));
    pristine_luma.push_back(to_luma(pristine.back()));
  }

  // Benchmark images.
  const auto specs = assign_gt_specs(n, config.seed);
  struct Bench {
    ImageBuffer gt, sharp, blurry;
  };
  say(config, "building benchmark images");
  const auto images = parallel_map(n, config.jobs, [&](std::size_t i) {
    const std::uint64_t cs = derive_seed(config.seed, hash_string(files[i].first));
    ImageBuffer gt = specs[i].severity == 0
                         ? pristine[i]
                         : apply_distortion(pristine[i], DistortionSpec{specs[i].family, specs[i].severity, cs});
    ImageBuffer sharp = add_gaussian_noise(pristine[i], config.sharp_noise_sigma, derive_seed(cs, 1));
    ImageBuffer blurry = downscale_upscale(gt, config.blurry_factor);
    return Bench{std::move(gt), std::move(sharp), std::move(blurry)};
  });
  std::vector<ManifestEntry> manifest;
  CsvTable gt_specs{{"content_id", "family", "severity"}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = files[i].first;
    std::filesystem::create_directories(bench / id);
    save_image(pristine[i], bench / id / "pristine.png");
    save_image(images[i].gt, bench / id / "gt.png");
    save_image(images[i].sharp, bench / id / "sharp.png");
    save_image(images[i].blurry, bench / id / "blurry.png");
    for (const std::string model : {"sharp", "blurry"}) {
      manifest.push_back(ManifestEntry{id, model, id + "/" + model + ".png", id + "/gt.png"});
    }
    gt_specs.rows.push_back({id, specs[i].severity == 0 ? "none" : std::string(family_name(specs[i].family)),
                             std::to_string(specs[i].severity)});
  }
  write_image_manifest(manifest, bench / "manifest.csv");
  write_csv(gt_specs, bench / "gt_degradation.csv");

  // NIQE model from the pristine corpus.
  say(config, "fitting the NIQE pristine model");
  const PristineModel niqe_model = fit_pristine_model(pristine_luma, config.niqe_patch);
  save_pristine_model(niqe_model, config.out / "niqe_pristine.bin");

  // RQI model.
  RqiModel rqi_model;
  DemoReport report;
  if (!config.model_path.empty()) {
    rqi_model = load_rqi_model(config.model_path);
  } else {
    say(config, fmt::format("training RQI on {} contents for {} epochs", config.train_contents, config.epochs));
    const std::vector<DistortionFamily> families(kAllFamilies.begin(), kAllFamilies.end());
    std::vector<LabeledSequence> train;
    const std::uint64_t synth_seed = derive_seed(config.seed, hash_string("synth"));
    const auto seqs = parallel_map(static_cast<std::size_t>(config.train_contents), config.jobs, [&](std::size_t i) {
      return labeled_sequence(make_sequence(files[i].first, pristine[i], families, synth_seed));
    });
    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.seed = derive_seed(config.seed, hash_string("train"));
    CsvTable hist{{"epoch", "train_loss", "validation_loss", "batches"}, {}};
    const TrainResult result = train_rqi(seqs, PairMode::kArbitrary, tc, [&](const EpochStats& s) {
      hist.rows.push_back({std::to_string(s.epoch), format_number(s.train_loss), format_number(s.validation_loss),
                           std::to_string(s.batches)});
      say(config, fmt::format("epoch {} train {:.5f} validation {:.5f}", s.epoch, s.train_loss, s.validation_loss));
    });
    rqi_model = result.model;
    report.best_epoch = result.best_epoch;
    write_csv(hist, config.out / "training.csv");
  }
  save_rqi_model(rqi_model, config.out / "rqi_model.rqi");

  // Metric table.
  say(config, "scoring the benchmark");
  const auto scores = parallel_map(n, config.jobs, [&](std::size_t i) {
    ContentScores s;
    const ImagePlane gt = to_luma(images[i].gt);
    const ImagePlane out[2] = {to_luma(images[i].sharp), to_luma(images[i].blurry)};
    s.gt_niqe = niqe_score(gt, niqe_model);
    const auto gt_features = protocol_features(rqi_model.network, gt, config.protocol);
    for (int m = 0; m < 2; ++m) {
      s.psnr[m] = psnr(out[m], gt);
      s.ssim[m] = ssim_score(out[m], gt);
      s.niqe[m] = niqe_score(out[m], niqe_model);
      const auto f = protocol_features(rqi_model.network, out[m], config.protocol);
      s.rqi[m] = score_features(rqi_model.network, f, gt_features);
    }
    return s;
  });
  MetricScoreTable table;
  const char* model_ids[2] = {"sharp", "blurry"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = files[i].first;
    table.gt_quality[id] = -scores[i].gt_niqe;
    for (int m = 0; m < 2; ++m) {
      table.rows.push_back({id, model_ids[m], "psnr", scores[i].psnr[m]});
      table.rows.push_back({id, model_ids[m], "ssim", scores[i].ssim[m]});
      table.rows.push_back({id, model_ids[m], "niqe", scores[i].niqe[m]});
      table.rows.push_back({id, model_ids[m], "rqi", scores[i].rqi[m]});
    }
  }
  write_metric_csv(table.rows, config.out / "metrics.csv");
  write_gt_quality_csv(table.gt_quality, config.out / "gt_quality.csv");

  // Sweep and control.
  say(config, "running the discard sweep and random control");
  const auto fractions = default_fractions();
  SweepResult sweep = discard_sweep(table, fractions, MetricDirections{});
  sweep.gt_source = "niqe";
  const ControlResult control =
      random_discard_control(table, fractions, config.control_trials, derive_seed(config.seed, hash_string("control")),
                             config.jobs);
  emit_sweep_artifacts(sweep, control, config.out / "sweep");

  // Headline numbers.
  report.n_contents = static_cast<int>(n);
  const auto order = quality_order(table);
  const std::size_t n_low = n / 2;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[files[i].first] = i;
  int psnr_low = 0, ssim_low = 0;
  for (std::size_t k = 0; k < n_low; ++k) {
    const auto& s = scores[index.at(order[k])];
    psnr_low += s.psnr[1] > s.psnr[0];
    ssim_low += s.ssim[1] > s.ssim[0];
  }
  report.low_quality_contents = static_cast<int>(n_low);
  report.psnr_prefers_blurry_low = static_cast<double>(psnr_low) / static_cast<double>(n_low);
  report.ssim_prefers_blurry_low = static_cast<double>(ssim_low) / static_cast<double>(n_low);
  int rqi_all = 0, rqi_held = 0, held = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool sharp_wins = scores[i].rqi[0] > scores[i].rqi[1];
    rqi_all += sharp_wins;
    if (config.model_path.empty() && i >= static_cast<std::size_t>(config.train_contents)) {
      ++held;
      rqi_held += sharp_wins;
    }
  }
  report.rqi_prefers_sharp = static_cast<double>(rqi_all) / static_cast<double>(n);
  report.rqi_prefers_sharp_heldout = held ? static_cast<double>(rqi_held) / held : report.rqi_prefers_sharp;

  const auto find = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
  };
  const std::size_t k_ssim = find(sweep.metrics, "ssim"), k_psnr = find(sweep.metrics, "psnr");
  const std::size_t m_sharp = find(sweep.models, "sharp"), m_blurry = find(sweep.models, "blurry");
  auto gap = [&](std::size_t f) { return sweep.mean[k_ssim][m_blurry][f] - sweep.mean[k_ssim][m_sharp][f]; };
  report.ssim_gap_start = gap(0);
  report.ssim_gap_end = gap(fractions.size() - 1);
  report.ssim_gap_narrows_monotonically = true;
  for (std::size_t f = 1; f < fractions.size(); ++f) {
    if (!(gap(f) < gap(f - 1))) report.ssim_gap_narrows_monotonically = false;
  }
  double worst = 0.0;
  for (std::size_t k : {k_ssim, k_psnr}) {
    for (std::size_t m : {m_sharp, m_blurry}) {
      for (std::size_t f = 1; f < fractions.size(); ++f) {
        const double sd = control.stddev[k][m][f];
        if (sd > 0) worst = std::max(worst, std::abs(control.mean[k][m][f] - control.mean[k][m][0]) / sd);
      }
    }
  }
  report.control_max_deviation_std = worst;

  CsvTable summary{{"key", "value"}, {}};
  auto put = [&](const std::string& k, const std::string& v) { summary.rows.push_back({k, v}); };
  put("n_contents", std::to_string(report.n_contents));
  put("low_quality_contents", std::to_string(report.low_quality_contents));
  put("psnr_prefers_blurry_low", format_number(report.psnr_prefers_blurry_low));
  put("ssim_prefers_blurry_low", format_number(report.ssim_prefers_blurry_low));
  put("rqi_prefers_sharp", format_number(report.rqi_prefers_sharp));
  put("rqi_prefers_sharp_heldout", format_number(report.rqi_prefers_sharp_heldout));
  put("ssim_gap_start", format_number(report.ssim_gap_start));
  put("ssim_gap_end", format_number(report.ssim_gap_end));
  put("ssim_gap_narrows_monotonically", report.ssim_gap_narrows_monotonically ? "true" : "false");
  put("control_max_deviation_std", format_number(report.control_max_deviation_std));
  put("best_epoch", std::to_string(report.best_epoch));
  write_csv(summary, config.out / "summary.csv");
  return report;
}

}  // namespace rqi
