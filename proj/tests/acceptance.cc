// Acceptance run: one PASS/FAIL line per headline criterion, exit 1 if any
// fails. Trains nine RQI models and runs the demo twice, so it takes a while.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "cli_pipeline.h"
#include "rqi/image/ops.h"
#include "rqi/metrics/niqe.h"
#include "rqi/model/train.h"
#include "rqi/stats/consistency.h"
#include "rqi/stats/correlation.h"
#include "rqi/stats/thurstone.h"
#include "rqi/util/csv.h"
#include "rqi/util/parallel.h"
#include "test_util.h"

using namespace rqi;
using namespace rqi::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// --- statistics -----------------------------------------------------------

void statistics_oracles() {
  bool ok = true;
  std::string notes;
  const auto expect = [&](bool cond, const char* what) {
    if (!cond) {
      ok = false;
      notes += std::string(" ") + what;
    }
  };
  expect(std::fabs(srcc(std::vector<double>{1, 2, 3}, std::vector<double>{3, 1, 2}) + 0.5) <= 1e-12, "srcc");
  expect(std::fabs(srcc(std::vector<double>{1, 2, 3, 4}, std::vector<double>{4, 3, 2, 1}) + 1.0) <= 1e-12,
         "srcc-reversal");
  {
    // Deviations x: -1.5 -0.5 0.5 1.5, y: -3 -2 -1 6.
    const double sxy = 4.5 + 1.0 - 0.5 + 9.0;
    const double want = sxy / std::sqrt(5.0 * 50.0);
    expect(std::fabs(plcc(std::vector<double>{0, 1, 2, 3}, std::vector<double>{0, 1, 2, 9}) - want) <= 1e-12,
           "plcc");
    expect(std::fabs(plcc(std::vector<double>{0, 1, 2, 3}, std::vector<double>{3, 5, 7, 9}) - 1.0) <= 1e-12,
           "plcc-affine");
  }
  {
    const std::vector<std::vector<double>> users{{0.1, 0.9, -1.0}, {2, 1, 0}, {0, 0, 5}};
    auto negated = users;
    for (auto& row : negated) {
      for (double& v : row) v = -v;
    }
    expect(winning_rate(users, users, true) == 1.0, "winning-identity");
    expect(winning_rate(negated, users, true) == 0.0, "winning-negated");
    SplitMix64 rng(3);
    std::vector<std::vector<double>> metric(1000, std::vector<double>(7)), user(1000, std::vector<double>(7));
    for (int c = 0; c < 1000; ++c) {
      for (int m = 0; m < 7; ++m) {
        metric[c][m] = rng.uniform();
        user[c][m] = rng.uniform();
      }
    }
    const double rate = winning_rate(metric, user, true);
    expect(rate >= 0.10 && rate <= 0.19, "winning-chance");
  }
  {
    CountMatrix even({"a", "b", "c"});
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) even.wins[i][j] = i == j ? 0 : 50;
    }
    bool zero = true;
    for (double s : thurstone_scale(even).scores) zero = zero && s == 0.0;
    expect(zero, "thurstone-even");

    CountMatrix ladder({"best", "mid", "worst"});
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) ladder.wins[i][j] = i < j ? 700 : (i > j ? 300 : 0);
    }
    const double z07 = 0.52440051270804067;  // Phi^-1(0.7)
    const auto s = thurstone_scale(ladder).scores;
    expect(std::fabs(s[0] - 2 * z07 / 3) <= 1e-9 && std::fabs(s[1]) <= 1e-9 && std::fabs(s[2] + 2 * z07 / 3) <= 1e-9,
           "thurstone-ladder");
  }
  int recovered = 0;
  const std::vector<double> truth{0.0, 0.5, 1.0, 1.5};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SplitMix64 rng(derive_seed(4242, seed));
    CountMatrix c({"i0", "i1", "i2", "i3"});
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) {
        const double p = normal_cdf(truth[i] - truth[j]);
        for (int t = 0; t < 1000; ++t) ++(rng.uniform() < p ? c.wins[i][j] : c.wins[j][i]);
      }
    }
    const auto sc = thurstone_scale(c).scores;
    recovered += sc[0] < sc[1] && sc[1] < sc[2] && sc[2] < sc[3];
  }
  expect(recovered >= 49, "thurstone-simulation");
  report("statistics-oracles", ok,
         fmt::format("srcc/plcc/winning_rate/thurstone fixtures{}, simulation recovered {}/50",
                     ok ? " match" : " failed:" + notes, recovered));
}

// --- pair law and gradient -------------------------------------------------

void pair_law() {
  bool ok = true;
  std::string first_bad;
  for (int n = 1; n <= 10; ++n) {
    SequenceLabels s{"c", {{"pristine", "pristine", 100.0}}};
    for (int i = 1; i <= n; ++i) s.images.push_back({"v" + std::to_string(i), "gaussian-blur", 100.0 - 7.0 * i});
    const std::vector<SequenceLabels> seqs{s};
    const auto arbitrary = build_pairs(seqs, PairMode::kArbitrary);
    const auto fr = build_pairs(seqs, PairMode::kFrStyle);
    bool good = arbitrary.size() == static_cast<std::size_t>((n + 1) * n) && fr.size() == static_cast<std::size_t>(n);
    std::map<std::pair<int, int>, double> label;
    for (const auto& p : arbitrary) label[{p.index_a, p.index_b}] = p.label;
    for (const auto& [key, l] : label) {
      auto it = label.find({key.second, key.first});
      good = good && it != label.end() && it->second == -l;
    }
    if (!good && ok) first_bad = std::to_string(n);
    ok = ok && good;
  }
  report("pair-construction-law", ok,
         ok ? "n = 1..10: (n+1)n arbitrary, n fr-style, mirrored labels negate exactly" : "fails at n = " + first_bad);
}

void gradient_check() {
  double worst = 0.0;
  for (auto mode : {HeadMode::kAntisymmetric, HeadMode::kRaw}) {
    RqiNetwork net(mode, 31);
    std::vector<ImagePlane> crops;
    for (int i = 0; i < 4; ++i) crops.push_back(random_plane(kCropSize, kCropSize, 70 + i, 0.0, 1.0));
    std::vector<const ImagePlane*> ptrs;
    for (const auto& c : crops) ptrs.push_back(&c);
    const std::vector<PairRef> pairs{{0, 1, 0.3}, {2, 3, -0.6}, {3, 0, 0.2}};
    std::vector<double> grad;
    net.loss(ptrs, pairs, &grad);
    SplitMix64 rng(mode == HeadMode::kRaw ? 7 : 8);
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = rng.bounded(net.parameters().size());
      const double w = net.parameters()[i];
      const double eps = 1e-6;  // small enough not to cross ReLU kinks
      net.parameters()[i] = w + eps;
      const double up = net.loss(ptrs, pairs, nullptr);
      net.parameters()[i] = w - eps;
      const double down = net.loss(ptrs, pairs, nullptr);
      net.parameters()[i] = w;
      const double numeric = (up - down) / (2 * eps);
      const double scale = std::max({std::fabs(numeric), std::fabs(grad[i]), 1e-12});
      worst = std::max(worst, std::fabs(numeric - grad[i]) / scale);
    }
  }
  report("gradient-check", worst <= 1e-4,
         fmt::format("20 random weights per head mode, worst relative error {:.2e}", worst));
}

// --- NIQE ------------------------------------------------------------------

void niqe_monotonicity() {
  const auto images = corpus_images();
  std::vector<ImagePlane> luma;
  for (const auto& img : images) luma.push_back(to_luma(img));
  const PristineModel model = fit_pristine_model(luma, 32, 0.75);
  const int jobs = resolve_jobs(0);
  bool monotone = true;
  std::string curves;
  for (auto family : kAllFamilies) {
    std::vector<double> medians{median(parallel_map(luma.size(), jobs, [&](std::size_t i) {
      return niqe_score(luma[i], model);
    }))};
    for (int s = 1; s <= 5; ++s) {
      medians.push_back(median(parallel_map(images.size(), jobs, [&](std::size_t i) {
        return niqe_score(to_luma(apply_distortion(images[i], {family, s, derive_seed(77, i)})), model);
      })));
      monotone = monotone && medians[s] >= medians[s - 1];
    }
    curves += fmt::format(" {} {:.1f}->{:.1f};", family_name(family), medians[1], medians[5]);
  }
  int wins = 0;
  for (std::size_t i = 0; i < luma.size(); ++i) {
    SplitMix64 rng(derive_seed(78, i));
    ImagePlane noisy = luma[i];
    for (double& v : noisy.data()) v = std::clamp(v + 30.0 * rng.normal(), 0.0, 255.0);
    wins += niqe_score(luma[i], model) < niqe_score(noisy, model);
  }
  const bool ok = monotone && wins * 10 >= static_cast<int>(luma.size()) * 9;
  report("niqe-monotonicity", ok,
         fmt::format("median non-decreasing over severity 0..5 for all families: {};{} pristine beats sigma-30 "
                     "noise on {}/{}",
                     monotone ? "yes" : "no", curves, wins, luma.size()));
}

// --- RQI training ---------------------------------------------------------

struct TrainedRun {
  PairMode mode;
  std::uint64_t seed;
  RqiModel model;
  double seconds = 0.0;
  HeldoutReport multi;
  HeldoutReport single;
};

struct Efficacy {
  std::vector<TrainedRun> runs;
  std::vector<LabeledSequence> heldout;
};

Efficacy scheme_efficacy() {
  const std::vector<DistortionFamily> families(kAllFamilies.begin(), kAllFamilies.end());
  const int jobs = resolve_jobs(0);
  const auto dataset = make_dataset(corpus_dir(), families, 7, jobs);
  std::vector<LabeledSequence> train, heldout;
  for (std::size_t i = 0; i < dataset.size(); ++i) (i < 20 ? train : heldout).push_back(labeled_sequence(dataset[i]));

  Efficacy e;
  e.heldout = heldout;
  InferenceProtocol multi;
  InferenceProtocol single;
  single.scales = 1;
  for (PairMode mode : {PairMode::kArbitrary, PairMode::kFrStyle, PairMode::kSingleDistortion}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      TrainConfig cfg;
      cfg.seed = seed;
      const auto start = Clock::now();
      TrainedRun run{mode, seed, train_rqi(train, mode, cfg).model, 0.0, {}, {}};
      run.seconds = seconds_since(start);
      run.multi = evaluate_heldout(run.model, heldout, multi, 5.0, jobs);
      if (mode == PairMode::kArbitrary) run.single = evaluate_heldout(run.model, heldout, single, 5.0, jobs);
      std::fprintf(stderr, "trained %s seed %llu in %.0f s: sign accuracy %.3f, srcc %.3f\n",
                   std::string(pair_mode_name(mode)).c_str(), static_cast<unsigned long long>(seed), run.seconds,
                   run.multi.sign_accuracy, run.multi.mean_srcc);
      e.runs.push_back(std::move(run));
    }
  }

  std::map<PairMode, std::vector<double>> srccs;
  double slowest = 0.0;
  bool arbitrary_ok = true;
  std::string arbitrary_detail;
  for (const auto& r : e.runs) {
    srccs[r.mode].push_back(r.multi.mean_srcc);
    slowest = std::max(slowest, r.seconds);
    if (r.mode == PairMode::kArbitrary) {
      arbitrary_ok = arbitrary_ok && r.multi.sign_accuracy >= 0.90 && r.multi.mean_srcc >= 0.80;
      arbitrary_detail += fmt::format(" {:.3f}/{:.3f}", r.multi.sign_accuracy, r.multi.mean_srcc);
    }
  }
  const double arb = mean(srccs[PairMode::kArbitrary]);
  const double fr = mean(srccs[PairMode::kFrStyle]);
  const double sgl = mean(srccs[PairMode::kSingleDistortion]);
  int per_seed_wins = 0;
  for (int s = 0; s < 3; ++s) {
    per_seed_wins += srccs[PairMode::kFrStyle][s] < srccs[PairMode::kArbitrary][s] &&
                     srccs[PairMode::kSingleDistortion][s] < srccs[PairMode::kArbitrary][s];
  }
  const bool ok = arbitrary_ok && fr < arb && sgl < arb && slowest <= 900.0;
  report("scheme-efficacy", ok,
         fmt::format("arbitrary sign-acc/srcc per seed{}; mean srcc arbitrary {:.3f}, fr {:.3f}, single {:.3f} "
                     "(arbitrary strictly best on {}/3 seeds); slowest training {:.0f} s",
                     arbitrary_detail, arb, fr, sgl, per_seed_wins, slowest));
  return e;
}

void antisymmetry(const RqiModel& model) {
  const auto start = Clock::now();
  const auto images = corpus_images();
  std::vector<ImagePlane> unit;
  for (const auto& img : images) {
    ImagePlane l = to_luma(img);
    for (double& v : l.data()) v /= 255.0;
    unit.push_back(std::move(l));
  }
  SplitMix64 rng(2718);
  double worst = 0.0;
  bool self_zero = true;
  const auto random_crop = [&](const ImagePlane& p, std::uint64_t x, std::uint64_t y) {
    return crop(p, {static_cast<int>(x % (p.width() - kCropSize + 1)), static_cast<int>(y % (p.height() - kCropSize + 1)),
                    kCropSize, kCropSize});
  };
  for (int k = 0; k < 1000; ++k) {
    const ImagePlane a = random_crop(unit[rng.bounded(unit.size())], rng.next(), rng.next());
    const ImagePlane b = random_crop(unit[rng.bounded(unit.size())], rng.next(), rng.next());
    worst = std::max(worst, std::fabs(model.network.forward(a, b) + model.network.forward(b, a)));
    self_zero = self_zero && model.network.forward(a, a) == 0.0;
  }
  const InferenceProtocol protocol;
  for (int k = 0; k < 100; ++k) {
    const std::size_t i = k % images.size();
    const auto family = kAllFamilies[k % kAllFamilies.size()];
    const ImageBuffer a = images[i];
    const ImageBuffer b = apply_distortion(images[i], {family, 1 + k % 5, derive_seed(99, k)});
    worst = std::max(worst, std::fabs(rqi_score(model, a, b, protocol) + rqi_score(model, b, a, protocol)));
    if (k < 10) self_zero = self_zero && rqi_score(model, a, a, protocol) == 0.0;
  }
  const double secs = seconds_since(start);
  report("rqi-antisymmetry", worst <= 1e-6 && self_zero && secs < 60.0,
         fmt::format("1000 crop pairs and 100 whole-image pairs: max |RQI(A,B)+RQI(B,A)| = {:.1e}, RQI(A,A) = 0 "
                     "exactly: {}; {:.1f} s",
                     worst, self_zero ? "yes" : "no", secs));
}

void multi_scale(const Efficacy& e) {
  const InferenceProtocol protocol;
  const auto small = plan_crops(64, 64, protocol);
  bool plans = small.size() == 1 && small[0].rects.size() == 20;
  for (auto [w, h] : {std::pair{256, 256}, std::pair{300, 260}, std::pair{512, 384}}) {
    const auto big = plan_crops(w, h, protocol);
    plans = plans && big.size() == 3;
    for (const auto& level : big) plans = plans && level.rects.size() == 20;
  }
  int multi_wins = 0;
  bool changes = false;
  std::string pairs;
  for (const auto& r : e.runs) {
    if (r.mode != PairMode::kArbitrary) continue;
    multi_wins += r.multi.mean_srcc >= r.single.mean_srcc;
    changes = changes || r.multi.content_srcc != r.single.content_srcc;
    pairs += fmt::format(" {:.3f}/{:.3f}", r.multi.mean_srcc, r.single.mean_srcc);
  }
  report("multi-scale-protocol", plans && changes && multi_wins >= 2,
         fmt::format("64x64 -> 1 level x 20 crops, >=256 -> 3 levels x 20: {}; held-out srcc multi/single per "
                     "seed{} (multi >= single on {}/3)",
                     plans ? "yes" : "no", pairs, multi_wins));
}

// --- CLI: determinism and the demo -----------------------------------------

void cli_and_demo() {
  TempDir work("acceptance_cli");
  TempDir scratch("acceptance_scratch");
  const auto checks = run_cli_determinism(RQI_CLI_PATH, work.path(), scratch.path(), corpus_dir(), true);
  bool all = true;
  std::string bad;
  double demo_seconds = 0.0;
  for (const auto& c : checks) {
    if (!(c.ran && c.identical)) {
      all = false;
      bad += fmt::format(" [{}: {}]", c.command, c.detail);
    }
    if (c.command == "demo") demo_seconds = c.first_run_seconds;
  }
  report("cli-determinism", all,
         fmt::format("{} subcommands rerun (second run with 3 workers){}", checks.size(),
                     all ? ": all outputs byte-identical" : bad));

  const auto summary_path = work / "demo" / "summary.csv";
  if (!std::filesystem::exists(summary_path)) {
    report("demo-reconstruction", false, "demo produced no summary");
    return;
  }
  std::map<std::string, std::string> s;
  for (const auto& row : read_csv(summary_path).rows) s[row[0]] = row[1];
  const auto num = [&](const char* k) { return parse_number(s.at(k)); };
  const bool a = num("psnr_prefers_blurry_low") >= 0.70 && num("ssim_prefers_blurry_low") >= 0.70;
  const bool b = num("rqi_prefers_sharp") >= 0.90;
  const double g0 = num("ssim_gap_start");
  const double g1 = num("ssim_gap_end");
  const bool c = s.at("ssim_gap_narrows_monotonically") == "true" && g1 < g0 && std::fabs(g1) < std::fabs(g0) &&
                 num("control_max_deviation_std") <= 2.0;
  report("demo-reconstruction", a && b && c && demo_seconds <= 600.0,
         fmt::format("(a) blurry preferred on low-quality GTs: psnr {:.2f}, ssim {:.2f}; (b) rqi prefers sharp on "
                     "{:.2f} (held-out {:.2f}); (c) ssim gap {:.4f} -> {:.4f}, strictly decreasing: {}, control "
                     "within {:.2f} std; {:.0f} s",
                     num("psnr_prefers_blurry_low"), num("ssim_prefers_blurry_low"), num("rqi_prefers_sharp"),
                     num("rqi_prefers_sharp_heldout"), g0, g1, s.at("ssim_gap_narrows_monotonically"),
                     num("control_max_deviation_std"), demo_seconds));
}

}  // namespace

int main() {
  try {
    statistics_oracles();
    pair_law();
    gradient_check();
    niqe_monotonicity();
    const Efficacy e = scheme_efficacy();
    antisymmetry(e.runs.front().model);
    multi_scale(e);
    cli_and_demo();
  } catch (const std::exception& ex) {
    std::printf("FAIL acceptance aborted: %s\n", ex.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
