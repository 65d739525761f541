#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace blindloom {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape4 = std::array<std::size_t, 4>;

inline std::string shape_string(const Shape4& s) {
  std::ostringstream os;
  os << "(" << s[0] << "," << s[1] << "," << s[2] << "," << s[3] << ")";
  return os.str();
}

// Dense (batch, channel, row, col) tensor, row-major.
template <typename Scalar>
class Tensor4 {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor4() = default;
  explicit Tensor4(const Shape4& shape, Scalar fill = Scalar(0))
      : shape_(shape), data_(Vector::Constant(static_cast<Eigen::Index>(count(shape)), fill)) {}

  static std::size_t count(const Shape4& s) { return s[0] * s[1] * s[2] * s[3]; }

  const Shape4& shape() const { return shape_; }
  std::size_t batch() const { return shape_[0]; }
  std::size_t channels() const { return shape_[1]; }
  std::size_t rows() const { return shape_[2]; }
  std::size_t cols() const { return shape_[3]; }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
  std::size_t plane_size() const { return shape_[2] * shape_[3]; }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t r, std::size_t x) const {
    return ((n * shape_[1] + c) * shape_[2] + r) * shape_[3] + x;
  }
  Scalar& operator()(std::size_t n, std::size_t c, std::size_t r, std::size_t x) {
    return data_[static_cast<Eigen::Index>(index(n, c, r, x))];
  }
  Scalar operator()(std::size_t n, std::size_t c, std::size_t r, std::size_t x) const {
    return data_[static_cast<Eigen::Index>(index(n, c, r, x))];
  }

  // One batch entry viewed as a (channels, rows*cols) matrix.
  MatrixMap sample(std::size_t n) {
    return MatrixMap(data_.data() + n * shape_[1] * plane_size(), static_cast<Eigen::Index>(shape_[1]),
                     static_cast<Eigen::Index>(plane_size()));
  }
  ConstMatrixMap sample(std::size_t n) const {
    return ConstMatrixMap(data_.data() + n * shape_[1] * plane_size(), static_cast<Eigen::Index>(shape_[1]),
                          static_cast<Eigen::Index>(plane_size()));
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor4<Other> cast() const {
    Tensor4<Other> out(shape_);
    out.data() = data_.template cast<Other>();
    return out;
  }

 private:
  Shape4 shape_{0, 0, 0, 0};
  Vector data_;
};

template <typename Scalar>
void require_same_shape(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

// A trainable tensor together with its Adam moments.
template <typename Scalar>
struct Parameter {
  Tensor4<Scalar> value;
  Tensor4<Scalar> m;
  Tensor4<Scalar> v;

  Parameter() = default;
  explicit Parameter(Tensor4<Scalar> init) : value(std::move(init)), m(value.shape()), v(value.shape()) {}
};

template <typename Scalar>
using Gradients = std::map<std::string, Tensor4<Scalar>>;

// Named parameters (sorted by name) plus the optimizer step counter.
template <typename Scalar>
struct ParamSet {
  std::map<std::string, Parameter<Scalar>> entries;
  std::uint64_t step = 0;

  void add(const std::string& name, Tensor4<Scalar> init) { entries[name] = Parameter<Scalar>(std::move(init)); }
  const Tensor4<Scalar>& operator[](const std::string& name) const { return entries.at(name).value; }
  Tensor4<Scalar>& value(const std::string& name) { return entries.at(name).value; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : entries) n += p.value.size();
    return n;
  }

  // Clears Adam moments and the step counter; values are kept.
  void reset_optimizer() {
    step = 0;
    for (auto& [name, p] : entries) {
      p.m = Tensor4<Scalar>(p.value.shape());
      p.v = Tensor4<Scalar>(p.value.shape());
    }
  }

  Gradients<Scalar> zero_gradients() const {
    Gradients<Scalar> g;
    for (const auto& [name, p] : entries) g.emplace(name, Tensor4<Scalar>(p.value.shape()));
    return g;
  }

  template <typename Other>
  ParamSet<Other> cast() const {
    ParamSet<Other> out;
    out.step = step;
    for (const auto& [name, p] : entries) {
      Parameter<Other> q;
      q.value = p.value.template cast<Other>();
      q.m = p.m.template cast<Other>();
      q.v = p.v.template cast<Other>();
      out.entries.emplace(name, std::move(q));
    }
    return out;
  }
};

template <typename Scalar>
void accumulate(Gradients<Scalar>& into, const Gradients<Scalar>& from) {
  for (const auto& [name, g] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, g);
    } else {
      require_same_shape(it->second, g, "accumulate");
      it->second.data() += g.data();
    }
  }
}

// ---------------------------------------------------------------------------
// Convolution (stride 1, odd square kernel, "same" zero padding)

namespace detail {

// Unfolds one sample (C, H, W) into a (C*k*k, H*W) patch matrix.
template <typename Scalar>
void im2col(const Scalar* in, std::size_t channels, std::size_t rows, std::size_t cols, std::size_t k,
            typename Tensor4<Scalar>::RowMatrix& out) {
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  const auto hw = rows * cols;
  out.resize(static_cast<Eigen::Index>(channels * k * k), static_cast<Eigen::Index>(hw));
  for (std::size_t c = 0; c < channels; ++c) {
    const Scalar* plane = in + c * hw;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        Scalar* dst = out.data() + ((c * k + ky) * k + kx) * hw;
        const auto dy = static_cast<std::ptrdiff_t>(ky) - half;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - half;
        for (std::size_t r = 0; r < rows; ++r) {
          const auto sr = static_cast<std::ptrdiff_t>(r) + dy;
          Scalar* row_dst = dst + r * cols;
          if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(rows)) {
            std::fill(row_dst, row_dst + cols, Scalar(0));
            continue;
          }
          const Scalar* src = plane + static_cast<std::size_t>(sr) * cols;
          for (std::size_t x = 0; x < cols; ++x) {
            const auto sx = static_cast<std::ptrdiff_t>(x) + dx;
            row_dst[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(cols)) ? Scalar(0) : src[sx];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch-matrix gradients back onto the image.
template <typename Scalar>
void col2im(const typename Tensor4<Scalar>::RowMatrix& patches, std::size_t channels, std::size_t rows,
            std::size_t cols, std::size_t k, Scalar* out) {
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  const auto hw = rows * cols;
  std::fill(out, out + channels * hw, Scalar(0));
  for (std::size_t c = 0; c < channels; ++c) {
    Scalar* plane = out + c * hw;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const Scalar* src = patches.data() + ((c * k + ky) * k + kx) * hw;
        const auto dy = static_cast<std::ptrdiff_t>(ky) - half;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - half;
        for (std::size_t r = 0; r < rows; ++r) {
          const auto sr = static_cast<std::ptrdiff_t>(r) + dy;
          if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(rows)) continue;
          Scalar* dst = plane + static_cast<std::size_t>(sr) * cols;
          const Scalar* row_src = src + r * cols;
          for (std::size_t x = 0; x < cols; ++x) {
            const auto sx = static_cast<std::ptrdiff_t>(x) + dx;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(cols)) dst[sx] += row_src[x];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void check_conv_shapes(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel, const Tensor4<Scalar>& bias) {
  const auto& ks = kernel.shape();
  if (ks[2] != ks[3] || ks[2] % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd extent, got " + shape_string(ks));
  }
  if (ks[1] != input.channels()) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(ks[1]) + " input channels, input " +
                     shape_string(input.shape()) + " has " + std::to_string(input.channels()));
  }
  if (bias.size() != ks[0]) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()) + " does not match " + std::to_string(ks[0]) +
                     " output channels");
  }
}

}  // namespace detail

// kernel: (out, in, k, k); bias: (1, out, 1, 1).
template <typename Scalar>
Tensor4<Scalar> conv2d(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel, const Tensor4<Scalar>& bias) {
  detail::check_conv_shapes(input, kernel, bias);
  const std::size_t out_ch = kernel.shape()[0];
  const std::size_t k = kernel.shape()[2];
  Tensor4<Scalar> out({input.batch(), out_ch, input.rows(), input.cols()});
  typename Tensor4<Scalar>::ConstMatrixMap w(kernel.data().data(), static_cast<Eigen::Index>(out_ch),
                                             static_cast<Eigen::Index>(input.channels() * k * k));
  const Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> b(bias.data().data(),
                                                                       static_cast<Eigen::Index>(out_ch));
  typename Tensor4<Scalar>::RowMatrix patches;
  for (std::size_t n = 0; n < input.batch(); ++n) {
    detail::im2col(input.data().data() + n * input.channels() * input.plane_size(), input.channels(), input.rows(),
                   input.cols(), k, patches);
    auto o = out.sample(n);
    o.noalias() = w * patches;
    o.colwise() += b;
  }
  return out;
}

template <typename Scalar>
struct ConvGradients {
  Tensor4<Scalar> input;
  Tensor4<Scalar> kernel;
  Tensor4<Scalar> bias;
};

template <typename Scalar>
ConvGradients<Scalar> conv2d_backward(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel,
                                      const Tensor4<Scalar>& grad_output, bool need_input_grad = true) {
  const std::size_t out_ch = kernel.shape()[0];
  const std::size_t k = kernel.shape()[2];
  if (grad_output.shape() != Shape4{input.batch(), out_ch, input.rows(), input.cols()}) {
    throw ShapeError("conv2d_backward: grad_output " + shape_string(grad_output.shape()) +
                     " inconsistent with input " + shape_string(input.shape()));
  }
  ConvGradients<Scalar> g{need_input_grad ? Tensor4<Scalar>(input.shape()) : Tensor4<Scalar>(), Tensor4<Scalar>(kernel.shape()),
                          Tensor4<Scalar>({1, out_ch, 1, 1})};
  const auto patch_rows = static_cast<Eigen::Index>(input.channels() * k * k);
  typename Tensor4<Scalar>::ConstMatrixMap w(kernel.data().data(), static_cast<Eigen::Index>(out_ch), patch_rows);
  typename Tensor4<Scalar>::MatrixMap gw(g.kernel.data().data(), static_cast<Eigen::Index>(out_ch), patch_rows);
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> gb(g.bias.data().data(), static_cast<Eigen::Index>(out_ch));
  typename Tensor4<Scalar>::RowMatrix patches;
  typename Tensor4<Scalar>::RowMatrix grad_patches;
  for (std::size_t n = 0; n < input.batch(); ++n) {
    const std::size_t offset = n * input.channels() * input.plane_size();
    detail::im2col(input.data().data() + offset, input.channels(), input.rows(), input.cols(), k, patches);
    const auto go = grad_output.sample(n);
    gw.noalias() += go * patches.transpose();
    gb += go.rowwise().sum();
    if (need_input_grad) {
      grad_patches.noalias() = w.transpose() * go;
      detail::col2im<Scalar>(grad_patches, input.channels(), input.rows(), input.cols(), k,
                             g.input.data().data() + offset);
    }
  }
  return g;
}

template <typename Scalar>
Tensor4<Scalar> relu(const Tensor4<Scalar>& x) {
  Tensor4<Scalar> out(x.shape());
  out.data() = x.data().cwiseMax(Scalar(0));
  return out;
}

// Gradient of relu given its pre-activation input.
template <typename Scalar>
Tensor4<Scalar> relu_backward(const Tensor4<Scalar>& pre_activation, const Tensor4<Scalar>& grad_output) {
  require_same_shape(pre_activation, grad_output, "relu_backward");
  Tensor4<Scalar> out(grad_output.shape());
  out.data() = (pre_activation.data().array() > Scalar(0)).select(grad_output.data(), Scalar(0));
  return out;
}

template <typename Scalar>
Tensor4<Scalar> add(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  require_same_shape(a, b, "add");
  Tensor4<Scalar> out(a.shape());
  out.data() = a.data() + b.data();
  return out;
}

// ---------------------------------------------------------------------------
// Masked L1

template <typename Scalar>
struct LossResult {
  Scalar loss = Scalar(0);
  Tensor4<Scalar> grad;  // d loss / d prediction
};

// loss = mean |w*pred - w*target|. The gradient is that of the mean, so each
// entry is w*sign(w*(pred - target)) / N; entries with w == 0 are exactly 0.
template <typename Scalar>
LossResult<Scalar> masked_l1(const Tensor4<Scalar>& prediction, const Tensor4<Scalar>& target,
                             const Tensor4<Scalar>& weight) {
  require_same_shape(prediction, target, "masked_l1");
  require_same_shape(prediction, weight, "masked_l1");
  LossResult<Scalar> r;
  r.grad = Tensor4<Scalar>(prediction.shape());
  const std::size_t n = prediction.size();
  if (n == 0) return r;
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  const auto diff = (weight.data().array() * (prediction.data().array() - target.data().array())).eval();
  r.loss = diff.abs().sum() * inv_n;
  r.grad.data() = (weight.data().array() * diff.sign() * inv_n).matrix();
  return r;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update with bias correction. A step whose gradients are all
// exactly zero leaves parameters and moments untouched (counter still advances).
template <typename Scalar>
void adam_step(ParamSet<Scalar>& params, const Gradients<Scalar>& grads, double lr, const AdamConfig& cfg = {}) {
  bool any_nonzero = false;
  for (const auto& [name, p] : params.entries) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ShapeError("adam_step: missing gradient for parameter '" + name + "'");
    require_same_shape(p.value, it->second, ("adam_step[" + name + "]").c_str());
    if (!it->second.all_finite()) {
      throw std::domain_error("adam_step: non-finite gradient in parameter '" + name + "'");
    }
    if (!it->second.data().isZero(0)) any_nonzero = true;
  }
  ++params.step;
  if (!any_nonzero) return;
  const double t = static_cast<double>(params.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  for (auto& [name, p] : params.entries) {
    const auto& g = grads.at(name).data().array();
    p.m.data().array() = b1 * p.m.data().array() + (Scalar(1) - b1) * g;
    p.v.data().array() = b2 * p.v.data().array() + (Scalar(1) - b2) * g.square();
    const auto m_hat = p.m.data().array() / static_cast<Scalar>(c1);
    const auto v_hat = p.v.data().array() / static_cast<Scalar>(c2);
    p.value.data().array() -= static_cast<Scalar>(lr) * m_hat / (v_hat.sqrt() + static_cast<Scalar>(cfg.eps));
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

// Evaluates the loss at `params`; when `grads` is non-null also fills in the
// analytic gradient.
template <typename Scalar>
using LossClosure = std::function<Scalar(const ParamSet<Scalar>&, const Tensor4<Scalar>&, Gradients<Scalar>*)>;

struct GradCheckOptions {
  double step = 1e-4;
  std::size_t samples = 128;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
};

// Compares analytic gradients against central differences on a random
// subsample of scalar parameters. The relative error of one entry is
// |analytic - numeric| / max(|numeric|, 1e-3 * max|numeric|, 1e-12).
template <typename Scalar>
GradCheckReport finite_diff_check(const ParamSet<Scalar>& model, const Tensor4<Scalar>& input,
                                  const LossClosure<Scalar>& loss, const GradCheckOptions& opt = {}) {
  Gradients<Scalar> analytic = model.zero_gradients();
  loss(model, input, &analytic);

  std::vector<std::pair<std::string, std::size_t>> all;
  for (const auto& [name, p] : model.entries) {
    for (std::size_t i = 0; i < p.value.size(); ++i) all.emplace_back(name, i);
  }
  std::mt19937_64 rng(opt.seed);
  std::shuffle(all.begin(), all.end(), rng);
  if (all.size() > opt.samples) all.resize(opt.samples);

  ParamSet<Scalar> probe = model;
  std::vector<double> numeric(all.size());
  double scale = 0.0;
  for (std::size_t j = 0; j < all.size(); ++j) {
    auto& slot = probe.value(all[j].first).data()[static_cast<Eigen::Index>(all[j].second)];
    const Scalar saved = slot;
    slot = saved + static_cast<Scalar>(opt.step);
    const double up = static_cast<double>(loss(probe, input, nullptr));
    slot = saved - static_cast<Scalar>(opt.step);
    const double down = static_cast<double>(loss(probe, input, nullptr));
    slot = saved;
    numeric[j] = (up - down) / (2.0 * opt.step);
    scale = std::max(scale, std::abs(numeric[j]));
  }

  GradCheckReport report;
  report.checked = all.size();
  for (std::size_t j = 0; j < all.size(); ++j) {
    const double a =
        static_cast<double>(analytic.at(all[j].first).data()[static_cast<Eigen::Index>(all[j].second)]);
    const double denom = std::max({std::abs(numeric[j]), 1e-3 * scale, 1e-12});
    const double rel = std::abs(a - numeric[j]) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = all[j].first + "[" + std::to_string(all[j].second) + "]";
    }
  }
  return report;
}

}  // namespace blindloom
