#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "rqi/error.h"
#include "rqi/image/ops.h"
#include "rqi/metrics/niqe.h"
#include "rqi/util/file.h"
#include "test_util.h"

using namespace rqi;
using rqi::testing::corpus_luma;

namespace {

// Generalized Gaussian draws with unit standard deviation, from the standard
// library's gamma generator (independent of the toolkit RNG).
std::vector<double> ggd_samples(double alpha, double sd, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::gamma_distribution<double> gamma(1.0 / alpha, 1.0);
  std::bernoulli_distribution sign(0.5);
  const double scale = sd * std::sqrt(std::tgamma(1.0 / alpha) / std::tgamma(3.0 / alpha));
  std::vector<double> x(n);
  for (auto& v : x) v = (sign(gen) ? 1.0 : -1.0) * scale * std::pow(gamma(gen), 1.0 / alpha);
  return x;
}

const std::vector<ImagePlane>& corpus() {
  static const auto c = corpus_luma();
  return c;
}

const PristineModel& corpus_model() {
  static const PristineModel m = fit_pristine_model(corpus(), 32, 0.75);
  return m;
}

double sharpness(const ImagePlane& tile) { return plane_mean(mscn_with_sigma(tile).local_sigma); }

}  // namespace

TEST_CASE("gamma_lanczos agrees with tgamma to 1e-10 relative") {
  for (double x = 0.05; x < 20.0; x += 0.0137) {
    CHECK(std::fabs(gamma_lanczos(x) - std::tgamma(x)) / std::tgamma(x) < 1e-10);
  }
  CHECK(gamma_lanczos(0.5) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
  CHECK(gamma_lanczos(5.0) == doctest::Approx(24.0).epsilon(1e-13));
}

TEST_CASE("mscn of a constant plane is zero") {
  const ImagePlane m = mscn(ImagePlane(20, 16, 137.0));
  for (double v : m.data()) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("mscn rejects planes smaller than the window") {
  CHECK_THROWS_AS(mscn(ImagePlane(6, 20, 1.0)), DimensionError);
  CHECK_NOTHROW(mscn(ImagePlane(7, 7, 1.0)));
}

TEST_CASE("mscn of Gaussian noise has variance near one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ImagePlane m = mscn(rqi::testing::noise_plane(64, 64, seed, 128.0, 20.0));
    double mean = 0.0, var = 0.0;
    for (double v : m.data()) mean += v;
    mean /= static_cast<double>(m.size());
    for (double v : m.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m.size() - 1);
    CHECK(var >= 0.5);
    CHECK(var <= 1.5);
  }
}

TEST_CASE("mscn mean is small on natural crops") {
  for (const auto& img : corpus()) {
    const ImagePlane m = mscn(crop(img, {32, 32, 96, 96}));
    CHECK(std::fabs(plane_mean(m)) <= 0.05);
  }
}

TEST_CASE("fit_ggd recovers standard normal parameters") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n01;
  std::vector<double> x(100000);
  for (auto& v : x) v = n01(gen);
  const GgdFit f = fit_ggd(x);
  CHECK(f.alpha == doctest::Approx(2.0).epsilon(0.05));
  CHECK(f.sigma == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("fit_ggd recovers Laplace shape") {
  std::mt19937_64 gen(12);
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> x(100000);
  for (auto& v : x) v = (sign(gen) ? 1.0 : -1.0) * e(gen);
  CHECK(std::fabs(fit_ggd(x).alpha - 1.0) <= 0.1);
}

TEST_CASE("fit_ggd recovers its own generating parameters") {
  for (double alpha : {0.5, 1.0, 2.0, 4.0}) {
    CAPTURE(alpha);
    const auto x = ggd_samples(alpha, 1.0, 100000, 100 + static_cast<std::uint64_t>(alpha * 10));
    const GgdFit f = fit_ggd(x);
    CHECK(std::fabs(f.alpha - alpha) <= 0.1 * std::max(1.0, alpha));
    CHECK(f.sigma == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("fit_aggd on symmetric samples gives equal sides") {
  const auto x = ggd_samples(1.3, 2.0, 50000, 21);
  const AggdFit f = fit_aggd(x);
  CHECK(std::fabs(f.sigma_left - f.sigma_right) / f.sigma_left <= 0.05);
  CHECK(std::fabs(f.alpha - 1.3) <= 0.1);
  CHECK(std::fabs(f.mean_offset) < 0.1);
}

TEST_CASE("fit_aggd recovers an asymmetric generator") {
  // Left scale 1, right scale 2, shape 1.5: each side is a half GGD whose
  // side probability is proportional to its scale.
  const double alpha = 1.5, sl = 1.0, sr = 2.0;
  std::mt19937_64 gen(5);
  std::gamma_distribution<double> gamma(1.0 / alpha, 1.0);
  std::bernoulli_distribution left(sl / (sl + sr));
  const double k = std::sqrt(std::tgamma(1.0 / alpha) / std::tgamma(3.0 / alpha));
  std::vector<double> x(200000);
  for (auto& v : x) {
    const double g = std::pow(gamma(gen), 1.0 / alpha);
    v = left(gen) ? -sl * k * g : sr * k * g;
  }
  const AggdFit f = fit_aggd(x);
  CHECK(std::fabs(f.alpha - alpha) <= 0.1);
  CHECK(f.sigma_left == doctest::Approx(sl).epsilon(0.05));
  CHECK(f.sigma_right == doctest::Approx(sr).epsilon(0.05));
  // Mean of the AGGD: (sr - sl) * Gamma(2/a) / Gamma(1/a) * k.
  const double mean = (sr - sl) * std::tgamma(2.0 / alpha) / std::tgamma(1.0 / alpha) * k;
  CHECK(f.mean_offset == doctest::Approx(mean).epsilon(0.05));
  CHECK(f.alpha >= 0.2);
  CHECK(f.alpha <= 10.0);
}

TEST_CASE("distribution fits reject degenerate input") {
  CHECK_THROWS_AS(fit_ggd(std::vector<double>(99, 1.0)), InsufficientData);
  CHECK_THROWS_AS(fit_ggd(std::vector<double>(500, 3.0)), DegenerateInput);
  CHECK_THROWS_AS(fit_aggd(std::vector<double>(500, 0.0)), DegenerateInput);
}

TEST_CASE("niqe_features is finite with 36 entries") {
  const NiqeFeatures f = niqe_features(crop(corpus()[0], {0, 0, 64, 64}));
  CHECK(f.size() == 36);
  for (double v : f) CHECK(std::isfinite(v));
}

TEST_CASE("niqe_features of a constant image is degenerate") {
  CHECK_THROWS_AS(niqe_features(ImagePlane(64, 64, 90.0)), DegenerateInput);
}

TEST_CASE("niqe_features alphas survive a 90 degree rotation") {
  // Rotation swaps H with V and D1 with D2.
  const int perm[18] = {0, 1, 6, 7, 8, 9, 2, 3, 4, 5, 14, 15, 16, 17, 10, 11, 12, 13};
  const int alphas[5] = {0, 2, 6, 10, 14};
  for (int i = 0; i < 5; ++i) {
    const ImagePlane p = crop(corpus()[i], {16, 16, 128, 128});
    const NiqeFeatures a = niqe_features(p);
    const NiqeFeatures b = niqe_features(rotate90(p));
    for (int s = 0; s < 2; ++s) {
      for (int k : alphas) CHECK(std::fabs(a[18 * s + k] - b[18 * s + perm[k]]) <= 0.1);
    }
  }
}

TEST_CASE("mirrored features match features of the mirrored plane") {
  const ImagePlane p = crop(corpus()[3], {0, 0, 64, 64});
  const NiqeFeatures a = mirrored(niqe_features(p));
  const NiqeFeatures b = niqe_features(mirror_horizontal(p));
  for (int i = 0; i < kNiqeFeatureCount; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
}

TEST_CASE("tile_grid drops partial tiles") {
  const auto t = tile_grid(100, 70, 32);
  REQUIRE(t.size() == 6);
  CHECK(t[0].x == 0);
  CHECK(t[1].x == 32);
  CHECK(t[3].y == 32);
  CHECK(t[5].x == 64);
}

TEST_CASE("fit_pristine_model preconditions") {
  std::vector<ImagePlane> nine(corpus().begin(), corpus().begin() + 9);
  CHECK_THROWS_AS(fit_pristine_model(nine, 32, 0.75), InsufficientData);
  std::vector<ImagePlane> ten(corpus().begin(), corpus().begin() + 10);
  CHECK_THROWS_AS(fit_pristine_model(ten, 32, 0.0), ValidationError);
  CHECK_THROWS_AS(fit_pristine_model(ten, 32, 1.0), ValidationError);
  // 10 images x 36 tiles leave 90 sharp tiles, fewer than 100.
  CHECK_THROWS_AS(fit_pristine_model(ten, 32, 0.75), InsufficientData);
}

TEST_CASE("pristine mean equals a brute-force average of surviving tiles") {
  struct T {
    NiqeFeatures f;
    double s;
  };
  std::vector<T> tiles;
  for (const auto& img : corpus()) {
    for (const auto& r : tile_grid(img.width(), img.height(), 32)) {
      const ImagePlane tile = crop(img, r);
      tiles.push_back({niqe_features(tile), sharpness(tile)});
    }
  }
  std::vector<double> s;
  for (const auto& t : tiles) s.push_back(t.s);
  std::sort(s.begin(), s.end());
  const double threshold = s[static_cast<std::size_t>(std::ceil(0.75 * s.size())) - 1];
  std::array<double, 36> sum{};
  double n = 0;
  for (const auto& t : tiles) {
    if (t.s < threshold) continue;
    const NiqeFeatures m = mirrored(t.f);
    for (int i = 0; i < 36; ++i) sum[i] += t.f[i] + m[i];
    n += 2;
  }
  const PristineModel& model = corpus_model();
  for (int i = 0; i < 36; ++i) CHECK(model.mu[i] == doctest::Approx(sum[i] / n).epsilon(1e-10));
  CHECK(model.patch_size == 32);
  for (int i = 0; i < 36; ++i) {
    for (int j = 0; j < 36; ++j) CHECK(model.cov[i * 36 + j] == model.cov[j * 36 + i]);
  }
}

TEST_CASE("duplicating the corpus leaves the model unchanged") {
  std::vector<ImagePlane> twice = corpus();
  twice.insert(twice.end(), corpus().begin(), corpus().end());
  const PristineModel a = corpus_model();
  const PristineModel b = fit_pristine_model(twice, 32, 0.75);
  for (int i = 0; i < 36; ++i) CHECK(b.mu[i] == doctest::Approx(a.mu[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < a.cov.size(); ++i) CHECK(b.cov[i] == doctest::Approx(a.cov[i]).epsilon(1e-9).scale(1e-9));
}

TEST_CASE("identical mirror-symmetric tiles leave only the regularizer") {
  ImagePlane half = crop(corpus()[7], {40, 40, 32, 32});
  const ImagePlane flipped = mirror_horizontal(half);
  for (std::size_t i = 0; i < half.size(); ++i) half.data()[i] = 0.5 * (half.data()[i] + flipped.data()[i]);
  const std::vector<ImagePlane> same(120, half);
  const PristineModel m = fit_pristine_model(same, 32, 0.75);
  for (int i = 0; i < 36; ++i) {
    for (int j = 0; j < 36; ++j) {
      CHECK(std::fabs(m.cov[i * 36 + j] - (i == j ? 1e-6 : 0.0)) < 1e-10);
    }
  }
}

TEST_CASE("an image is close to a model fit on itself") {
  const ImagePlane& img = corpus()[4];
  const std::vector<ImagePlane> copies(10, img);
  const PristineModel m = fit_pristine_model(copies, 24, 0.75);
  const double d = niqe_score(img, m);
  CHECK(d >= 0.0);
  CHECK(d <= 0.5);
}

TEST_CASE("pristine images beat their sigma-30 noisy versions") {
  const auto images = rqi::testing::corpus_images();
  int wins = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const double clean = niqe_score(corpus()[i], corpus_model());
    SplitMix64 rng(900 + i);
    ImagePlane noisy = corpus()[i];
    for (double& v : noisy.data()) v = std::clamp(v + 30.0 * rng.normal(), 0.0, 255.0);
    const double dirty = niqe_score(noisy, corpus_model());
    CHECK(clean >= 0.0);
    wins += clean < dirty;
  }
  CHECK(wins >= 27);
}

TEST_CASE("niqe_score is invariant to horizontal mirroring") {
  for (const auto& img : corpus()) {
    const double a = niqe_score(img, corpus_model());
    const double b = niqe_score(mirror_horizontal(img), corpus_model());
    CHECK(std::fabs(a - b) <= 0.05 * a);
  }
}

TEST_CASE("niqe_score on an untileable image") {
  CHECK_THROWS_AS(niqe_score(ImagePlane(20, 20, 5.0), corpus_model()), DegenerateInput);
}

TEST_CASE("pristine model file round-trips with the documented layout") {
  rqi::testing::TempDir dir("niqe");
  save_pristine_model(corpus_model(), dir / "m.niqe");
  const auto bytes = read_file_bytes(dir / "m.niqe");
  REQUIRE(bytes.size() == 5 + 4 + 8 + 36 * 8 + 36 * 36 * 8);
  CHECK(std::memcmp(bytes.data(), "NIQE1", 5) == 0);
  CHECK(bytes[5] == 32);
  CHECK(bytes[6] == 0);
  double q;
  std::memcpy(&q, bytes.data() + 9, 8);
  CHECK(q == 0.75);
  const PristineModel back = load_pristine_model(dir / "m.niqe");
  CHECK(back.mu == corpus_model().mu);
  CHECK(back.cov == corpus_model().cov);
  CHECK(back.patch_size == 32);

  auto bad = bytes;
  bad[0] = 'X';
  write_file_bytes(dir / "bad.niqe", bad);
  CHECK_THROWS_AS(load_pristine_model(dir / "bad.niqe"), FormatError);
  write_file_bytes(dir / "short.niqe", std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 100));
  CHECK_THROWS_AS(load_pristine_model(dir / "short.niqe"), FormatError);
}
