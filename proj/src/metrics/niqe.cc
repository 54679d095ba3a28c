#include "rqi/metrics/niqe.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "rqi/error.h"
#include "rqi/image/ops.h"
#include "rqi/util/file.h"

namespace rqi {

namespace {

constexpr double kMscnSigma = 7.0 / 6.0;
constexpr int kMscnRadius = 3;
constexpr int kMinSamples = 100;
constexpr double kZeroVariance = 1e-12;
constexpr int kGridSize = 9801;  // 0.2 .. 10 in steps of 0.001
constexpr double kCovRegularizer = 1e-6;
constexpr double kEigenFloor = 1e-8;

double grid_alpha(int k) { return 0.2 + 0.001 * k; }

// r(alpha) = Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2 on the shape grid.
const std::vector<double>& ratio_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kGridSize);
    for (int k = 0; k < kGridSize; ++k) {
      const double a = grid_alpha(k);
      const double g2 = gamma_lanczos(2.0 / a);
      t[k] = gamma_lanczos(1.0 / a) * gamma_lanczos(3.0 / a) / (g2 * g2);
    }
    return t;
  }();
  return table;
}

template <typename F>
int argmin_grid(F distance) {
  int best = 0;
  double best_d = distance(0);
  for (int k = 1; k < kGridSize; ++k) {
    const double d = distance(k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

void check_samples(std::span<const double> samples) {
  if (samples.size() < static_cast<std::size_t>(kMinSamples)) {
    throw InsufficientData("distribution fit needs at least 100 samples, got " +
                           std::to_string(samples.size()));
  }
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(samples.size());
  if (!(var > kZeroVariance)) throw DegenerateInput("distribution fit on zero-variance samples");
}

// Neighbour products over the overlap of the plane with its (dx, dy) shift.
std::vector<double> pair_products(const ImagePlane& m, int dx, int dy) {
  std::vector<double> out;
  const int x0 = std::max(0, -dx);
  const int x1 = m.width() - std::max(0, dx);
  const int y1 = m.height() - dy;
  out.reserve(static_cast<std::size_t>(std::max(0, x1 - x0)) * std::max(0, y1));
  for (int y = 0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) out.push_back(m.at(x, y) * m.at(x + dx, y + dy));
  }
  return out;
}

void scale_features(const ImagePlane& p, double* out) {
  if (std::min(p.width(), p.height()) < 2 * kMscnRadius + 1) {
    throw DimensionError("niqe_features: plane smaller than the MSCN window");
  }
  const ImagePlane m = mscn(p);
  const AggdFit base = fit_aggd(m.data());
  out[0] = base.alpha;
  out[1] = 0.5 * (base.sigma_left + base.sigma_right);
  constexpr int kShifts[4][2] = {{1, 0}, {0, 1}, {1, 1}, {-1, 1}};
  for (int s = 0; s < 4; ++s) {
    const auto products = pair_products(m, kShifts[s][0], kShifts[s][1]);
    const AggdFit fit = fit_aggd(products);
    out[2 + 4 * s] = fit.alpha;
    out[3 + 4 * s] = fit.mean_offset;
    out[4 + 4 * s] = fit.sigma_left * fit.sigma_left;
    out[5 + 4 * s] = fit.sigma_right * fit.sigma_right;
  }
}

struct Tile {
  NiqeFeatures features;
  double sharpness;
};

// Tiles that survive feature extraction; flat tiles are dropped.
std::vector<Tile> image_tiles(const ImagePlane& img, int patch_size) {
  std::vector<Tile> tiles;
  for (const CropRect& r : tile_grid(img.width(), img.height(), patch_size)) {
    const ImagePlane patch = crop(img, r);
    try {
      Tile t{niqe_features(patch), plane_mean(mscn_with_sigma(patch).local_sigma)};
      tiles.push_back(t);
    } catch (const DegenerateInput&) {
    }
  }
  return tiles;
}

// Smallest value v with at least a fraction q of the values <= v.
double nearest_rank_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

std::vector<const Tile*> sharpest(const std::vector<Tile>& tiles, double q) {
  std::vector<double> s;
  for (const auto& t : tiles) s.push_back(t.sharpness);
  const double threshold = nearest_rank_quantile(s, q);
  std::vector<const Tile*> kept;
  for (const auto& t : tiles) {
    if (t.sharpness >= threshold) kept.push_back(&t);
  }
  return kept;
}

struct Mvg {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Mvg fit_mvg(const std::vector<const Tile*>& tiles) {
  const auto n = static_cast<double>(tiles.size());
  Mvg g{Eigen::VectorXd::Zero(kNiqeFeatureCount), Eigen::MatrixXd::Zero(kNiqeFeatureCount, kNiqeFeatureCount)};
  for (const Tile* t : tiles) g.mean += Eigen::Map<const Eigen::VectorXd>(t->features.data(), kNiqeFeatureCount);
  g.mean /= n;
  for (const Tile* t : tiles) {
    const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(t->features.data(), kNiqeFeatureCount) - g.mean;
    g.cov += d * d.transpose();
  }
  g.cov /= n;
  return g;
}

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
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint64_t take(int n) {
    if (pos_ + n > bytes_.size()) throw FormatError("NIQE model: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
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
  std::size_t pos_ = 0;
};

}  // namespace

double gamma_lanczos(double x) {
  static constexpr double kCoefficients[9] = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * gamma_lanczos(1.0 - x));
  }
  x -= 1.0;
  double a = kCoefficients[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += kCoefficients[i] / (x + i);
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

MscnResult mscn_with_sigma(const ImagePlane& p) {
  if (std::min(p.width(), p.height()) < 2 * kMscnRadius + 1) {
    throw DimensionError("mscn: plane must be at least 7x7");
  }
  const ImagePlane mu = gaussian_filter(p, kMscnSigma, kMscnRadius);
  ImagePlane sq(p.width(), p.height());
  for (std::size_t i = 0; i < sq.size(); ++i) sq.data()[i] = p.data()[i] * p.data()[i];
  const ImagePlane mu_sq = gaussian_filter(sq, kMscnSigma, kMscnRadius);
  MscnResult r{ImagePlane(p.width(), p.height()), ImagePlane(p.width(), p.height())};
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double m = mu.data()[i];
    const double sigma = std::sqrt(std::max(0.0, mu_sq.data()[i] - m * m));
    r.local_sigma.data()[i] = sigma;
    r.coefficients.data()[i] = (p.data()[i] - m) / (sigma + 1.0);
  }
  return r;
}

GgdFit fit_ggd(std::span<const double> samples) {
  check_samples(samples);
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (double v : samples) {
    abs_sum += std::fabs(v);
    sq_sum += v * v;
  }
  const double n = static_cast<double>(samples.size());
  const double mean_abs = abs_sum / n;
  const double mean_sq = sq_sum / n;
  const double r_hat = mean_sq / (mean_abs * mean_abs);
  const auto& table = ratio_table();
  const int k = argmin_grid([&](int i) { return std::fabs(table[i] - r_hat); });
  return GgdFit{grid_alpha(k), std::sqrt(mean_sq)};
}

AggdFit fit_aggd(std::span<const double> samples) {
  check_samples(samples);
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0;
  std::size_t left_n = 0, right_n = 0;
  for (double v : samples) {
    if (v < 0) {
      left_sq += v * v;
      ++left_n;
    } else if (v > 0) {
      right_sq += v * v;
      ++right_n;
    }
    abs_sum += std::fabs(v);
  }
  if (left_n == 0 || right_n == 0) throw DegenerateInput("AGGD fit needs samples on both sides of zero");
  const double n = static_cast<double>(samples.size());
  const double sigma_left = std::sqrt(left_sq / static_cast<double>(left_n));
  const double sigma_right = std::sqrt(right_sq / static_cast<double>(right_n));
  const double gamma_hat = sigma_left / sigma_right;
  const double mean_abs = abs_sum / n;
  const double r_hat = mean_abs * mean_abs / ((left_sq + right_sq) / n);
  const double g2 = gamma_hat * gamma_hat;
  const double r_norm = r_hat * (g2 * gamma_hat + 1.0) * (gamma_hat + 1.0) / ((g2 + 1.0) * (g2 + 1.0));
  // rho(alpha) = Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)) = 1 / r(alpha).
  const auto& table = ratio_table();
  const int k = argmin_grid([&](int i) { return std::fabs(1.0 / table[i] - r_norm); });
  const double alpha = grid_alpha(k);
  const double g1 = gamma_lanczos(1.0 / alpha);
  const double g3 = gamma_lanczos(3.0 / alpha);
  const double gm = gamma_lanczos(2.0 / alpha);
  const double offset = (sigma_right - sigma_left) * (gm / g1) * std::sqrt(g1 / g3);
  return AggdFit{alpha, sigma_left, sigma_right, offset};
}

NiqeFeatures niqe_features(const ImagePlane& p) {
  NiqeFeatures f{};
  scale_features(p, f.data());
  scale_features(downscale_half(p), f.data() + 18);
  return f;
}

NiqeFeatures mirrored(const NiqeFeatures& f) {
  NiqeFeatures m = f;
  for (int scale = 0; scale < 2; ++scale) {
    for (int i = 0; i < 4; ++i) std::swap(m[18 * scale + 10 + i], m[18 * scale + 14 + i]);
  }
  return m;
}

namespace {

// Each tile also enters as its mirror image, which makes both MVGs, and so
// the score, invariant to horizontal flips.
Mvg fit_mirror_mvg(const std::vector<const Tile*>& kept) {
  std::vector<Tile> augmented;
  augmented.reserve(2 * kept.size());
  for (const Tile* t : kept) {
    augmented.push_back(*t);
    augmented.push_back(Tile{mirrored(t->features), t->sharpness});
  }
  std::vector<const Tile*> pointers;
  for (const auto& t : augmented) pointers.push_back(&t);
  return fit_mvg(pointers);
}

}  // namespace

std::vector<CropRect> tile_grid(int width, int height, int patch_size) {
  if (patch_size < 1) throw DimensionError("patch size must be positive");
  std::vector<CropRect> rects;
  for (int y = 0; y + patch_size <= height; y += patch_size) {
    for (int x = 0; x + patch_size <= width; x += patch_size) rects.push_back({x, y, patch_size, patch_size});
  }
  return rects;
}

PristineModel fit_pristine_model(std::span<const ImagePlane> corpus, int patch_size, double sharpness_quantile) {
  if (corpus.size() < 10) {
    throw InsufficientData("pristine model needs at least 10 images, got " + std::to_string(corpus.size()));
  }
  if (!(sharpness_quantile > 0.0 && sharpness_quantile < 1.0)) {
    throw ValidationError("sharpness quantile must lie in (0, 1)");
  }
  if (patch_size < 16) throw DimensionError("patch size must be at least 16");
  std::vector<Tile> tiles;
  for (const ImagePlane& img : corpus) {
    auto t = image_tiles(img, patch_size);
    tiles.insert(tiles.end(), t.begin(), t.end());
  }
  if (tiles.empty()) throw InsufficientData("no textured tiles in the corpus");
  const auto kept = sharpest(tiles, sharpness_quantile);
  if (kept.size() < 100) {
    throw InsufficientData("only " + std::to_string(kept.size()) + " tiles pass the sharpness threshold; need 100");
  }
  const Mvg g = fit_mirror_mvg(kept);
  PristineModel model;
  model.patch_size = patch_size;
  model.sharpness_quantile = sharpness_quantile;
  model.cov.resize(kNiqeFeatureCount * kNiqeFeatureCount);
  for (int i = 0; i < kNiqeFeatureCount; ++i) {
    model.mu[i] = g.mean[i];
    for (int j = 0; j < kNiqeFeatureCount; ++j) {
      model.cov[i * kNiqeFeatureCount + j] = g.cov(i, j) + (i == j ? kCovRegularizer : 0.0);
    }
  }
  return model;
}

double niqe_score(const ImagePlane& img, const PristineModel& model) {
  const auto tiles = image_tiles(img, model.patch_size);
  if (tiles.empty()) {
    throw DegenerateInput("niqe_score: image has no textured " + std::to_string(model.patch_size) + "-pixel tile");
  }
  const Mvg own = fit_mirror_mvg(sharpest(tiles, model.sharpness_quantile));
  const Eigen::Map<const Eigen::Matrix<double, kNiqeFeatureCount, kNiqeFeatureCount, Eigen::RowMajor>> pristine_cov(
      model.cov.data());
  const Eigen::Map<const Eigen::VectorXd> pristine_mu(model.mu.data(), kNiqeFeatureCount);
  const Eigen::MatrixXd pooled = 0.5 * (Eigen::MatrixXd(pristine_cov) + own.cov);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pooled);
  const Eigen::VectorXd d = pristine_mu - own.mean;
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * d;
  double dist = 0.0;
  for (int i = 0; i < kNiqeFeatureCount; ++i) {
    const double lambda = eig.eigenvalues()[i];
    if (lambda > kEigenFloor) dist += proj[i] * proj[i] / lambda;
  }
  return std::sqrt(std::max(0.0, dist));
}

void save_pristine_model(const PristineModel& model, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out{'N', 'I', 'Q', 'E', '1'};
  put_u32(out, static_cast<std::uint32_t>(model.patch_size));
  put_f64(out, model.sharpness_quantile);
  for (double v : model.mu) put_f64(out, v);
  if (model.cov.size() != kNiqeFeatureCount * kNiqeFeatureCount) {
    throw DimensionError("pristine model covariance must be 36x36");
  }
  for (double v : model.cov) put_f64(out, v);
  write_file_bytes(path, out);
}

PristineModel load_pristine_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 5 || std::memcmp(bytes.data(), "NIQE1", 5) != 0) {
    throw FormatError(path.string() + ": not a NIQE1 model file");
  }
  Reader in(std::span<const std::uint8_t>(bytes).subspan(5));
  PristineModel model;
  model.patch_size = static_cast<int>(in.take(4));
  model.sharpness_quantile = in.f64();
  for (double& v : model.mu) v = in.f64();
  model.cov.resize(kNiqeFeatureCount * kNiqeFeatureCount);
  for (double& v : model.cov) v = in.f64();
  if (!in.done()) throw FormatError(path.string() + ": trailing bytes in NIQE1 model");
  return model;
}

}  // namespace rqi
