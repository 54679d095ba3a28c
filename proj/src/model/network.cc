#include "rqi/model/network.h"

#include <Eigen/Dense>
#include <cmath>

#include "rqi/error.h"
#include "rqi/util/rng.h"

namespace rqi {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

constexpr int kConvLayers = 4;
constexpr int kDenseLayers = 3;

struct Offsets {
  std::array<std::size_t, kConvLayers> conv_w{}, conv_b{};
  std::array<std::size_t, kDenseLayers> dense_w{}, dense_b{};
  std::size_t total = 0;
};

const Offsets& offsets() {
  static const Offsets o = [] {
    Offsets r;
    std::size_t at = 0;
    for (int l = 0; l < kConvLayers; ++l) {
      r.conv_w[l] = at;
      at += static_cast<std::size_t>(kConvChannels[l + 1]) * 9 * kConvChannels[l];
      r.conv_b[l] = at;
      at += kConvChannels[l + 1];
    }
    for (int l = 0; l < kDenseLayers; ++l) {
      r.dense_w[l] = at;
      at += static_cast<std::size_t>(kHeadWidths[l + 1]) * kHeadWidths[l];
      r.dense_b[l] = at;
      at += kHeadWidths[l + 1];
    }
    r.total = at;
    return r;
  }();
  return o;
}

int side(int layer) { return kCropSize >> layer; }  // input side of a conv layer

// Activations are (channels x batch*height*width), column-major, so the
// channels of one pixel are contiguous. Buffers live in a per-thread
// workspace that only grows: reallocating these multi-megabyte blocks on
// every call costs more than the convolutions themselves.
// Storage is kept maximally aligned so that Eigen's vectorized loops peel
// identically on every call; otherwise results could differ in the last bit
// between a fresh and a reused buffer.
using MatrixMap = Eigen::Map<Eigen::MatrixXd, Eigen::AlignedMax>;

class Buffer {
 public:
  MatrixMap view(Eigen::Index rows, Eigen::Index cols) {
    const auto n = static_cast<std::size_t>(rows * cols);
    if (data_.size() < n) data_.resize(n);
    return MatrixMap(data_.data(), rows, cols);
  }

 private:
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

struct Workspace {
  int batch = 0;
  std::array<Buffer, kConvLayers + 1> act;  // act[l] is the input of layer l
  std::array<Buffer, kConvLayers> cols;
  std::array<Buffer, kConvLayers> pre;
  Buffer grad_act, grad_next, grad_col;
};

Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

Eigen::Index pixels_of(int layer_side, int batch) {
  return static_cast<Eigen::Index>(batch) * layer_side * layer_side;
}

void im2col(const MatrixMap& a, int channels, int in_side, int batch, MatrixMap& col) {
  const int out_side = in_side / 2;
  const int out_pixels = out_side * out_side;
  const Eigen::Index rows = 9 * channels;
  col.setZero();
  const double* src = a.data();
  double* dst = col.data();
  for (int n = 0; n < batch; ++n) {
    const double* image = src + static_cast<std::size_t>(n) * in_side * in_side * channels;
    for (int oy = 0; oy < out_side; ++oy) {
      for (int ox = 0; ox < out_side; ++ox) {
        double* column = dst + (static_cast<std::size_t>(n) * out_pixels + oy * out_side + ox) * rows;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = 2 * oy + ky - 1;
          if (iy < 0 || iy >= in_side) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = 2 * ox + kx - 1;
            if (ix < 0 || ix >= in_side) continue;
            const double* pixel = image + static_cast<std::size_t>(iy * in_side + ix) * channels;
            std::copy(pixel, pixel + channels, column + (ky * 3 + kx) * channels);
          }
        }
      }
    }
  }
}

void col2im(const MatrixMap& dcol, int channels, int in_side, int batch, MatrixMap& da) {
  const int out_side = in_side / 2;
  const int out_pixels = out_side * out_side;
  const Eigen::Index rows = 9 * channels;
  da.setZero();
  const double* src = dcol.data();
  double* dst = da.data();
  for (int n = 0; n < batch; ++n) {
    double* image = dst + static_cast<std::size_t>(n) * in_side * in_side * channels;
    for (int oy = 0; oy < out_side; ++oy) {
      for (int ox = 0; ox < out_side; ++ox) {
        const double* column = src + (static_cast<std::size_t>(n) * out_pixels + oy * out_side + ox) * rows;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = 2 * oy + ky - 1;
          if (iy < 0 || iy >= in_side) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = 2 * ox + kx - 1;
            if (ix < 0 || ix >= in_side) continue;
            double* pixel = image + static_cast<std::size_t>(iy * in_side + ix) * channels;
            const double* from = column + (ky * 3 + kx) * channels;
            for (int c = 0; c < channels; ++c) pixel[c] += from[c];
          }
        }
      }
    }
  }
}

// Fills ws.act / ws.cols / ws.pre and returns phi (64 x batch).
Eigen::MatrixXd tower_forward(std::span<const double> p, std::span<const ImagePlane* const> crops, Workspace& ws) {
  const int batch = static_cast<int>(crops.size());
  const Offsets& o = offsets();
  ws.batch = batch;
  MatrixMap input = ws.act[0].view(1, pixels_of(kCropSize, batch));
  for (int n = 0; n < batch; ++n) {
    const ImagePlane& crop = *crops[n];
    if (crop.width() != kCropSize || crop.height() != kCropSize) {
      throw ShapeError("network input must be a " + std::to_string(kCropSize) + "x" + std::to_string(kCropSize) +
                       " crop");
    }
    const auto d = crop.data();
    std::copy(d.begin(), d.end(), input.data() + static_cast<std::size_t>(n) * kCropSize * kCropSize);
  }
  for (int l = 0; l < kConvLayers; ++l) {
    const int cin = kConvChannels[l], cout = kConvChannels[l + 1];
    const MatrixMap a = ws.act[l].view(cin, pixels_of(side(l), batch));
    MatrixMap col = ws.cols[l].view(9 * cin, pixels_of(side(l + 1), batch));
    im2col(a, cin, side(l), batch, col);
    const ConstRowMap w(p.data() + o.conv_w[l], cout, 9 * cin);
    const Eigen::Map<const Eigen::VectorXd> b(p.data() + o.conv_b[l], cout);
    MatrixMap z = ws.pre[l].view(cout, col.cols());
    z.noalias() = w * col;
    z.colwise() += b;
    ws.act[l + 1].view(cout, col.cols()) = z.cwiseMax(0.0);
  }
  const int pixels = side(kConvLayers) * side(kConvLayers);
  const MatrixMap last = ws.act[kConvLayers].view(kFeatureDim, pixels_of(side(kConvLayers), batch));
  Eigen::MatrixXd phi(kFeatureDim, batch);
  for (int n = 0; n < batch; ++n) {
    phi.col(n) = last.middleCols(static_cast<Eigen::Index>(n) * pixels, pixels).rowwise().sum() / pixels;
  }
  return phi;
}

void tower_backward(std::span<const double> p, Workspace& ws, const Eigen::MatrixXd& dphi, std::span<double> grad) {
  const Offsets& o = offsets();
  const int batch = ws.batch;
  const int pixels = side(kConvLayers) * side(kConvLayers);
  Buffer* da_buf = &ws.grad_act;
  Buffer* next_buf = &ws.grad_next;
  MatrixMap da = da_buf->view(kFeatureDim, pixels_of(side(kConvLayers), batch));
  for (int n = 0; n < batch; ++n) {
    for (int i = 0; i < pixels; ++i) da.col(static_cast<Eigen::Index>(n) * pixels + i) = dphi.col(n) / pixels;
  }
  for (int l = kConvLayers - 1; l >= 0; --l) {
    const int cin = kConvChannels[l], cout = kConvChannels[l + 1];
    const Eigen::Index cols = pixels_of(side(l + 1), batch);
    MatrixMap dz = da_buf->view(cout, cols);  // ReLU gate applied in place
    const MatrixMap z = ws.pre[l].view(cout, cols);
    dz = (z.array() > 0.0).select(dz, 0.0);
    const MatrixMap col = ws.cols[l].view(9 * cin, cols);
    RowMap gw(grad.data() + o.conv_w[l], cout, 9 * cin);
    gw.noalias() += dz * col.transpose();
    // Sum into an aligned temporary: a vectorized reduction written straight
    // into the caller's (arbitrarily aligned) gradient would peel different
    // rows onto the scalar path, changing rounding from call to call.
    const Eigen::VectorXd bias_grad = dz.rowwise().sum();
    for (int c = 0; c < cout; ++c) grad[o.conv_b[l] + c] += bias_grad[c];
    if (l > 0) {
      const ConstRowMap w(p.data() + o.conv_w[l], cout, 9 * cin);
      MatrixMap dcol = ws.grad_col.view(9 * cin, cols);
      dcol.noalias() = w.transpose() * dz;
      MatrixMap prev = next_buf->view(cin, pixels_of(side(l), batch));
      col2im(dcol, cin, side(l), batch, prev);
      std::swap(da_buf, next_buf);
    }
  }
}

// One head evaluation with hand-written loops so the result depends only on
// the input vector, never on its position in a batch.
struct HeadTrace {
  std::array<double, kHeadInput> u;
  std::array<double, 64> z1;
  std::array<double, 32> z2;
  double out;
};

void head_eval(std::span<const double> p, const double* fa, const double* fb, HeadTrace& t) {
  const Offsets& o = offsets();
  for (int i = 0; i < kFeatureDim; ++i) {
    t.u[i] = fa[i];
    t.u[kFeatureDim + i] = fb[i];
    t.u[2 * kFeatureDim + i] = fa[i] - fb[i];
  }
  const double* w1 = p.data() + o.dense_w[0];
  const double* b1 = p.data() + o.dense_b[0];
  for (int j = 0; j < 64; ++j) {
    double s = b1[j];
    for (int i = 0; i < kHeadInput; ++i) s += w1[j * kHeadInput + i] * t.u[i];
    t.z1[j] = s;
  }
  const double* w2 = p.data() + o.dense_w[1];
  const double* b2 = p.data() + o.dense_b[1];
  for (int j = 0; j < 32; ++j) {
    double s = b2[j];
    for (int i = 0; i < 64; ++i) s += w2[j * 64 + i] * std::max(0.0, t.z1[i]);
    t.z2[j] = s;
  }
  const double* w3 = p.data() + o.dense_w[2];
  double s = p[o.dense_b[2]];
  for (int i = 0; i < 32; ++i) s += w3[i] * std::max(0.0, t.z2[i]);
  t.out = s;
}

// Accumulates parameter gradients for d(loss)/d(out) = g and writes
// d(loss)/d(phi_a), d(loss)/d(phi_b) increments.
void head_backward(std::span<const double> p, const HeadTrace& t, double g, std::span<double> grad, double* dfa,
                   double* dfb) {
  const Offsets& o = offsets();
  const double* w3 = p.data() + o.dense_w[2];
  const double* w2 = p.data() + o.dense_w[1];
  const double* w1 = p.data() + o.dense_w[0];
  std::array<double, 32> dz2;
  for (int i = 0; i < 32; ++i) {
    const double h2 = std::max(0.0, t.z2[i]);
    grad[o.dense_w[2] + i] += g * h2;
    dz2[i] = t.z2[i] > 0.0 ? g * w3[i] : 0.0;
  }
  grad[o.dense_b[2]] += g;
  std::array<double, 64> dz1{};
  for (int j = 0; j < 32; ++j) {
    if (dz2[j] == 0.0) continue;
    grad[o.dense_b[1] + j] += dz2[j];
    for (int i = 0; i < 64; ++i) {
      grad[o.dense_w[1] + j * 64 + i] += dz2[j] * std::max(0.0, t.z1[i]);
      dz1[i] += dz2[j] * w2[j * 64 + i];
    }
  }
  std::array<double, kHeadInput> du{};
  for (int j = 0; j < 64; ++j) {
    if (t.z1[j] <= 0.0 || dz1[j] == 0.0) continue;
    const double d = dz1[j];
    grad[o.dense_b[0] + j] += d;
    for (int i = 0; i < kHeadInput; ++i) {
      grad[o.dense_w[0] + j * kHeadInput + i] += d * t.u[i];
      du[i] += d * w1[j * kHeadInput + i];
    }
  }
  for (int i = 0; i < kFeatureDim; ++i) {
    dfa[i] += du[i] + du[2 * kFeatureDim + i];
    dfb[i] += du[kFeatureDim + i] - du[2 * kFeatureDim + i];
  }
}

}  // namespace

std::size_t RqiNetwork::parameter_count() { return offsets().total; }

std::vector<std::uint32_t> RqiNetwork::architecture() {
  std::vector<std::uint32_t> a{static_cast<std::uint32_t>(kCropSize)};
  for (int c : kConvChannels) a.push_back(static_cast<std::uint32_t>(c));
  for (int w : kHeadWidths) a.push_back(static_cast<std::uint32_t>(w));
  return a;
}

RqiNetwork::RqiNetwork(HeadMode mode, std::uint64_t seed) : mode_(mode), params_(parameter_count(), 0.0) {
  const Offsets& o = offsets();
  SplitMix64 rng(seed);
  auto fill = [&](std::size_t at, std::size_t count, int fan_in) {
    const double sd = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < count; ++i) params_[at + i] = sd * rng.normal();
  };
  for (int l = 0; l < kConvLayers; ++l) {
    fill(o.conv_w[l], o.conv_b[l] - o.conv_w[l], 9 * kConvChannels[l]);
  }
  for (int l = 0; l < kDenseLayers; ++l) {
    fill(o.dense_w[l], o.dense_b[l] - o.dense_w[l], kHeadWidths[l]);
  }
}

RqiNetwork::RqiNetwork(HeadMode mode, std::vector<double> parameters) : mode_(mode), params_(std::move(parameters)) {
  if (params_.size() != parameter_count()) {
    throw ShapeError("network expects " + std::to_string(parameter_count()) + " parameters, got " +
                     std::to_string(params_.size()));
  }
  for (double v : params_) {
    if (!std::isfinite(v)) throw ShapeError("network parameters must be finite");
  }
}

std::vector<FeatureVector> RqiNetwork::features(std::span<const ImagePlane* const> crops) const {
  std::vector<FeatureVector> out(crops.size());
  if (crops.empty()) return out;
  const Eigen::MatrixXd phi = tower_forward(params_, crops, workspace());
  for (std::size_t n = 0; n < crops.size(); ++n) {
    for (int i = 0; i < kFeatureDim; ++i) out[n][i] = phi(i, static_cast<Eigen::Index>(n));
  }
  return out;
}

double RqiNetwork::head(const FeatureVector& a, const FeatureVector& b) const {
  HeadTrace t;
  head_eval(params_, a.data(), b.data(), t);
  if (mode_ == HeadMode::kRaw) return t.out;
  const double ab = t.out;
  head_eval(params_, b.data(), a.data(), t);
  return 0.5 * (ab - t.out);
}

double RqiNetwork::forward(const ImagePlane& a, const ImagePlane& b) const {
  // Separate tower calls keep phi(a) independent of what it is paired with.
  const ImagePlane* pa = &a;
  const ImagePlane* pb = &b;
  const auto fa = features(std::span(&pa, 1));
  const auto fb = features(std::span(&pb, 1));
  return head(fa[0], fb[0]);
}

double RqiNetwork::loss(std::span<const ImagePlane* const> crops, std::span<const PairRef> pairs,
                        std::vector<double>* gradient) const {
  if (pairs.empty()) throw EmptyInput("loss over an empty batch");
  Workspace& ws = workspace();
  const Eigen::MatrixXd phi = tower_forward(params_, crops, ws);
  Eigen::MatrixXd dphi;
  if (gradient) {
    gradient->assign(params_.size(), 0.0);
    dphi = Eigen::MatrixXd::Zero(kFeatureDim, phi.cols());
  }
  const double scale = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  HeadTrace ab, ba;
  for (const PairRef& pr : pairs) {
    const double* fa = phi.col(pr.a).data();
    const double* fb = phi.col(pr.b).data();
    head_eval(params_, fa, fb, ab);
    double out = ab.out;
    if (mode_ == HeadMode::kAntisymmetric) {
      head_eval(params_, fb, fa, ba);
      out = 0.5 * (ab.out - ba.out);
    }
    const double err = out - pr.label;
    total += err * err;
    if (!gradient) continue;
    const double g = 2.0 * err * scale;
    double* da = dphi.col(pr.a).data();
    double* db = dphi.col(pr.b).data();
    if (mode_ == HeadMode::kAntisymmetric) {
      head_backward(params_, ab, 0.5 * g, *gradient, da, db);
      head_backward(params_, ba, -0.5 * g, *gradient, db, da);
    } else {
      head_backward(params_, ab, g, *gradient, da, db);
    }
  }
  if (gradient) tower_backward(params_, ws, dphi, *gradient);
  return total * scale;
}

}  // namespace rqi
