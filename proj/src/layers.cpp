#include "azarnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "azarnet/parallel.hpp"
#include "gemm.hpp"

namespace azarnet {

namespace {

template <typename T>
T sign_of(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

// Adds d/dv of the regularizer, scaled by `scale`, into grad.
template <typename T>
void add_regularizer_grad(const Regularizer& reg, const BasicTensor<T>& v, BasicTensor<T>& grad,
                          double scale = 1.0) {
  if (!reg.active()) return;
  const T l1 = static_cast<T>(reg.l1 * scale);
  const T l2x2 = static_cast<T>(2.0 * reg.l2 * scale);
  for (std::size_t i = 0; i < v.size(); ++i) grad[i] += l1 * sign_of(v[i]) + l2x2 * v[i];
}

std::string format_rate(double rate) {
  std::ostringstream os;
  os << rate;
  return os.str();
}

template <typename T>
void require_cache(bool cached, const std::string& name) {
  if (!cached) throw StateError(name + ": backward without a cached train-mode forward");
}

// Rows of `col` are output pixels; columns are (ky, kx, c) for a 3x3 window
// with zero padding 1.
template <typename T>
void im2col3x3(const T* in, std::size_t h, std::size_t w, std::size_t c, T* col) {
  const std::size_t k = 9 * c;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      T* row = col + (y * w + x) * k;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t iy = std::ptrdiff_t(y + ky) - 1;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::ptrdiff_t ix = std::ptrdiff_t(x + kx) - 1;
          T* dst = row + (ky * 3 + kx) * c;
          if (iy < 0 || ix < 0 || iy >= std::ptrdiff_t(h) || ix >= std::ptrdiff_t(w)) {
            std::fill(dst, dst + c, T(0));
          } else {
            const T* src = in + (std::size_t(iy) * w + std::size_t(ix)) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im3x3_add(const T* col, std::size_t h, std::size_t w, std::size_t c, T* out) {
  const std::size_t k = 9 * c;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const T* row = col + (y * w + x) * k;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t iy = std::ptrdiff_t(y + ky) - 1;
        if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::ptrdiff_t ix = std::ptrdiff_t(x + kx) - 1;
          if (ix < 0 || ix >= std::ptrdiff_t(w)) continue;
          const T* src = row + (ky * 3 + kx) * c;
          T* dst = out + (std::size_t(iy) * w + std::size_t(ix)) * c;
          for (std::size_t i = 0; i < c; ++i) dst[i] += src[i];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
double regularizer_value(const Regularizer& reg, const BasicTensor<T>& v) {
  if (!reg.active()) return 0.0;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (T x : v.values()) {
    abs_sum += std::abs(static_cast<double>(x));
    sq_sum += static_cast<double>(x) * static_cast<double>(x);
  }
  return reg.l1 * abs_sum + reg.l2 * sq_sum;
}

template <typename T>
void glorot_uniform(BasicTensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
}

// ---- Conv2d ----

template <typename T>
Conv2d<T>::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
                  Regularizer kernel_reg_, Regularizer activity_reg_)
    : Layer<T>(std::move(name)),
      kernel({3, 3, in_channels, out_channels}),
      bias({out_channels}),
      kernel_grad({3, 3, in_channels, out_channels}),
      bias_grad({out_channels}),
      kernel_reg(kernel_reg_),
      activity_reg(activity_reg_) {}

template <typename T>
std::string Conv2d<T>::label() const {
  return "2D Convolution (3*3)(" + std::to_string(out_channels()) + ")";
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[2] != in_channels()) {
    throw DimensionError(this->name() + ": expected (H, W, " + std::to_string(in_channels()) +
                         ") input, got " + shape_to_string(input));
  }
  return {input[0], input[1], out_channels()};
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& x, Mode mode, Rng&) {
  if (x.rank() != 4 || x.dim(3) != in_channels()) {
    throw DimensionError(this->name() + ": expected [B, H, W, " + std::to_string(in_channels()) +
                         "] input, got " + shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cin = in_channels(), cout = out_channels();
  const std::size_t hw = h * w, k = 9 * cin;

  BasicTensor<T> y({batch, h, w, cout});
  parallel_for(batch, [&](std::size_t b) {
    std::vector<T> col(hw * k);
    im2col3x3(x.data() + b * hw * cin, h, w, cin, col.data());
    T* out = y.data() + b * hw * cout;
    for (std::size_t p = 0; p < hw; ++p) std::copy(bias.data(), bias.data() + cout, out + p * cout);
    detail::gemm<T>(false, false, hw, cout, k, col.data(), kernel.data(), out, true);
  });

  if (mode == Mode::Train) {
    input_ = x;
    output_ = activity_reg.active() ? y : BasicTensor<T>{};
    cached_ = true;
  } else {
    clear_cache();
  }
  return y;
}

template <typename T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& grad_out) {
  require_cache<T>(cached_, this->name());
  const std::size_t batch = input_.dim(0), h = input_.dim(1), w = input_.dim(2);
  const std::size_t cin = in_channels(), cout = out_channels();
  const std::size_t hw = h * w, k = 9 * cin;
  if (grad_out.shape() != Shape{batch, h, w, cout}) {
    throw DimensionError(this->name() + ": grad_out shape " + shape_to_string(grad_out.shape()));
  }

  BasicTensor<T> g = grad_out;
  if (activity_reg.active()) add_regularizer_grad(activity_reg, output_, g, 1.0 / double(batch));

  BasicTensor<T> grad_in;
  if (propagate_input_grad) grad_in = BasicTensor<T>({batch, h, w, cin});
  std::vector<T> dk(batch * k * cout);
  std::vector<T> db(batch * cout, T(0));

  parallel_for(batch, [&](std::size_t b) {
    std::vector<T> col(hw * k);
    im2col3x3(input_.data() + b * hw * cin, h, w, cin, col.data());
    const T* gb = g.data() + b * hw * cout;
    detail::gemm<T>(true, false, k, cout, hw, col.data(), gb, dk.data() + b * k * cout, false);
    T* dbb = db.data() + b * cout;
    for (std::size_t p = 0; p < hw; ++p) {
      for (std::size_t o = 0; o < cout; ++o) dbb[o] += gb[p * cout + o];
    }
    if (propagate_input_grad) {
      // col buffer reused for d(col).
      detail::gemm<T>(false, true, hw, k, cout, gb, kernel.data(), col.data(), false);
      col2im3x3_add(col.data(), h, w, cin, grad_in.data() + b * hw * cin);
    }
  });

  kernel_grad.fill(T(0));
  bias_grad.fill(T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    const T* dkb = dk.data() + b * k * cout;
    for (std::size_t i = 0; i < k * cout; ++i) kernel_grad[i] += dkb[i];
    for (std::size_t o = 0; o < cout; ++o) bias_grad[o] += db[b * cout + o];
  }
  add_regularizer_grad(kernel_reg, kernel, kernel_grad);
  return grad_in;
}

template <typename T>
std::vector<ParamRef<T>> Conv2d<T>::params() {
  return {{"kernel", &kernel, &kernel_grad}, {"bias", &bias, &bias_grad}};
}

template <typename T>
double Conv2d<T>::penalty() const {
  double total = regularizer_value(kernel_reg, kernel);
  if (activity_reg.active()) {
    if (!cached_) throw StateError(this->name() + ": activity penalty needs a train-mode forward");
    total += regularizer_value(activity_reg, output_) / static_cast<double>(input_.dim(0));
  }
  return total;
}

template <typename T>
void Conv2d<T>::clear_cache() {
  input_ = {};
  output_ = {};
  cached_ = false;
}

// ---- MaxPool2x2 ----

template <typename T>
Shape MaxPool2x2<T>::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[0] % 2 != 0 || input[1] % 2 != 0) {
    throw DimensionError(this->name() + ": 2x2 pooling needs even (H, W, C), got " +
                         shape_to_string(input));
  }
  return {input[0] / 2, input[1] / 2, input[2]};
}

template <typename T>
BasicTensor<T> MaxPool2x2<T>::forward(const BasicTensor<T>& x, Mode mode, Rng&) {
  if (x.rank() != 4 || x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
    throw DimensionError(this->name() + ": 2x2 pooling needs [B, even H, even W, C], got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  BasicTensor<T> y({batch, oh, ow, c});
  std::vector<std::uint32_t> arg(y.size());
  std::size_t o = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t base = b * h * w * c;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t i00 = base + ((2 * oy) * w + 2 * ox) * c;
        const std::size_t cand[4] = {i00, i00 + c, i00 + w * c, i00 + w * c + c};
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = cand[0] + ch;
          for (int q = 1; q < 4; ++q) {
            if (x[cand[q] + ch] > x[best]) best = cand[q] + ch;
          }
          y[o] = x[best];
          arg[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  if (mode == Mode::Train) {
    input_shape_ = x.shape();
    argmax_ = std::move(arg);
    cached_ = true;
  } else {
    clear_cache();
  }
  return y;
}

template <typename T>
BasicTensor<T> MaxPool2x2<T>::backward(const BasicTensor<T>& grad_out) {
  require_cache<T>(cached_, this->name());
  if (grad_out.size() != argmax_.size()) {
    throw DimensionError(this->name() + ": grad_out shape " + shape_to_string(grad_out.shape()));
  }
  BasicTensor<T> grad_in(input_shape_);
  for (std::size_t i = 0; i < argmax_.size(); ++i) grad_in[argmax_[i]] += grad_out[i];
  return grad_in;
}

template <typename T>
void MaxPool2x2<T>::clear_cache() {
  argmax_.clear();
  cached_ = false;
}

// ---- BatchNorm ----

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels, double momentum_, double epsilon_)
    : Layer<T>(std::move(name)),
      gamma({channels}, T(1)),
      beta({channels}),
      running_mean({channels}),
      running_var({channels}, T(1)),
      gamma_grad({channels}),
      beta_grad({channels}),
      momentum(momentum_),
      epsilon(epsilon_) {}

template <typename T>
std::string BatchNorm<T>::label() const {
  return "Batch Normalization (" + format_rate(momentum) + ")";
}

template <typename T>
BasicTensor<T> BatchNorm<T>::forward(const BasicTensor<T>& x, Mode mode, Rng&) {
  const std::size_t c = gamma.size();
  if (x.empty() || x.rank() < 2 || x.shape().back() != c) {
    throw DimensionError(this->name() + ": expected non-empty [B, ..., " + std::to_string(c) +
                         "] input, got " + shape_to_string(x.shape()));
  }
  const std::size_t rows = x.size() / c;
  BasicTensor<T> y(x.shape());

  if (mode == Mode::Infer) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T inv = T(1) / std::sqrt(running_var[ch] + static_cast<T>(epsilon));
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = r * c + ch;
        y[i] = gamma[ch] * (x[i] - running_mean[ch]) * inv + beta[ch];
      }
    }
    clear_cache();
    return y;
  }

  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) mean[ch] += x[r * c + ch];
  }
  for (double& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = x[r * c + ch] - mean[ch];
      var[ch] += d * d;
    }
  }
  for (double& v : var) v /= static_cast<double>(rows);

  xhat_ = BasicTensor<T>(x.shape());
  inv_std_.assign(c, T(0));
  for (std::size_t ch = 0; ch < c; ++ch) inv_std_[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + epsilon));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = r * c + ch;
      xhat_[i] = (x[i] - static_cast<T>(mean[ch])) * inv_std_[ch];
      y[i] = gamma[ch] * xhat_[i] + beta[ch];
    }
  }
  const T keep = static_cast<T>(momentum);
  const T take = static_cast<T>(1.0 - momentum);
  for (std::size_t ch = 0; ch < c; ++ch) {
    running_mean[ch] = keep * running_mean[ch] + take * static_cast<T>(mean[ch]);
    running_var[ch] = keep * running_var[ch] + take * static_cast<T>(var[ch]);
  }
  cached_ = true;
  return y;
}

template <typename T>
BasicTensor<T> BatchNorm<T>::backward(const BasicTensor<T>& grad_out) {
  require_cache<T>(cached_, this->name());
  if (grad_out.shape() != xhat_.shape()) {
    throw DimensionError(this->name() + ": grad_out shape " + shape_to_string(grad_out.shape()));
  }
  const std::size_t c = gamma.size();
  const std::size_t rows = xhat_.size() / c;
  std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = r * c + ch;
      sum_dy[ch] += grad_out[i];
      sum_dy_xhat[ch] += static_cast<double>(grad_out[i]) * xhat_[i];
    }
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    gamma_grad[ch] = static_cast<T>(sum_dy_xhat[ch]);
    beta_grad[ch] = static_cast<T>(sum_dy[ch]);
  }
  // dx = gamma * inv_std / N * (N dy - sum dy - xhat * sum(dy xhat))
  BasicTensor<T> grad_in(xhat_.shape());
  const double n = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = r * c + ch;
      const double scale = static_cast<double>(gamma[ch]) * inv_std_[ch] / n;
      grad_in[i] = static_cast<T>(scale * (n * grad_out[i] - sum_dy[ch] - xhat_[i] * sum_dy_xhat[ch]));
    }
  }
  return grad_in;
}

template <typename T>
std::vector<ParamRef<T>> BatchNorm<T>::params() {
  return {{"gamma", &gamma, &gamma_grad},
          {"beta", &beta, &beta_grad},
          {"running_mean", &running_mean, nullptr},
          {"running_var", &running_var, nullptr}};
}

template <typename T>
void BatchNorm<T>::clear_cache() {
  xhat_ = {};
  inv_std_.clear();
  cached_ = false;
}

// ---- Dropout ----

template <typename T>
Dropout<T>::Dropout(std::string name, double rate) : Layer<T>(std::move(name)), rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError(this->name() + ": dropout rate must be in [0, 1)");
}

template <typename T>
std::string Dropout<T>::label() const {
  return "Dropout (" + format_rate(rate_) + ")";
}

template <typename T>
BasicTensor<T> Dropout<T>::forward(const BasicTensor<T>& x, Mode mode, Rng& rng) {
  if (mode == Mode::Infer) {
    clear_cache();
    return x;
  }
  mask_ = BasicTensor<T>(x.shape(), T(1));
  if (rate_ > 0.0) {
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    for (T& m : mask_.values()) m = rng.uniform() < rate_ ? T(0) : keep_scale;
  }
  cached_ = true;
  BasicTensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask_[i];
  return y;
}

template <typename T>
BasicTensor<T> Dropout<T>::backward(const BasicTensor<T>& grad_out) {
  require_cache<T>(cached_, this->name());
  if (grad_out.shape() != mask_.shape()) {
    throw DimensionError(this->name() + ": grad_out shape " + shape_to_string(grad_out.shape()));
  }
  BasicTensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask_[i];
  return g;
}

template <typename T>
void Dropout<T>::clear_cache() {
  mask_ = {};
  cached_ = false;
}

// ---- LeakyRelu ----

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, double alpha) {
  BasicTensor<T> y = x;
  const T a = static_cast<T>(alpha);
  for (T& v : y.values()) v = v > T(0) ? v : a * v;
  return y;
}

template <typename T>
BasicTensor<T> LeakyRelu<T>::forward(const BasicTensor<T>& x, Mode mode, Rng&) {
  if (mode == Mode::Train) {
    input_ = x;
    cached_ = true;
  } else {
    clear_cache();
  }
  return leaky_relu(x, alpha_);
}

template <typename T>
BasicTensor<T> LeakyRelu<T>::backward(const BasicTensor<T>& grad_out) {
  require_cache<T>(cached_, this->name());
  if (grad_out.shape() != input_.shape()) {
    throw DimensionError(this->name() + ": grad_out shape " + shape_to_string(grad_out.shape()));
  }
  BasicTensor<T> g = grad_out;
  const T a = static_cast<T>(alpha_);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(input_[i] > T(0))) g[i] *= a;
  }
  return g;
}

template <typename T>
void LeakyRelu<T>::clear_cache() {
  input_ = {};
  cached_ = false;
}

// ---- Reshape ----

template <typename T>
Shape Reshape<T>::output_shape(const Shape& input) const {
  if (shape_size(input) != shape_size(target_)) {
    throw DimensionError(this->name() + ": cannot reshape " + shape_to_string(input) + " to " +
                         shape_to_string(target_));
  }
  return target_;
}

template <typename T>
BasicTensor<T> Reshape<T>::forward(const BasicTensor<T>& x, Mode, Rng&) {
  if (x.rank() < 1) throw DimensionError(this->name() + ": empty input");
  input_shape_ = x.shape();
  Shape out{x.dim(0)};
  out.insert(out.end(), target_.begin(), target_.end());
  return x.reshaped(out);
}

template <typename T>
BasicTensor<T> Reshape<T>::backward(const BasicTensor<T>& grad_out) {
  if (input_shape_.empty()) throw StateError(this->name() + ": backward before forward");
  return grad_out.reshaped(input_shape_);
}

// ---- Gru ----

template <typename T>
Gru<T>::Gru(std::string name, std::size_t input_dim, std::size_t units, bool return_sequences,
            Regularizer kernel_reg_, Regularizer activity_reg_)
    : Layer<T>(std::move(name)),
      kernel({input_dim, 3 * units}),
      recurrent_kernel({units, 3 * units}),
      input_bias({3 * units}),
      recurrent_bias({3 * units}),
      kernel_grad({input_dim, 3 * units}),
      recurrent_kernel_grad({units, 3 * units}),
      input_bias_grad({3 * units}),
      recurrent_bias_grad({3 * units}),
      kernel_reg(kernel_reg_),
      activity_reg(activity_reg_),
      input_dim_(input_dim),
      units_(units),
      return_sequences_(return_sequences) {}

template <typename T>
std::string Gru<T>::label() const {
  return "GRU (" + std::to_string(units_) + ")";
}

template <typename T>
Shape Gru<T>::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != input_dim_) {
    throw DimensionError(this->name() + ": expected (T, " + std::to_string(input_dim_) + ") input, got " +
                         shape_to_string(input));
  }
  if (return_sequences_) return {input[0], units_};
  return {units_};
}

template <typename T>
BasicTensor<T> Gru<T>::forward(const BasicTensor<T>& x, Mode mode, Rng&) {
  if (x.rank() != 3) {
    throw DimensionError(this->name() + ": expected [B, T, " + std::to_string(input_dim_) + "] input, got " +
                         shape_to_string(x.shape()));
  }
  return forward_from(x, BasicTensor<T>({x.dim(0), units_}), mode);
}

template <typename T>
BasicTensor<T> Gru<T>::forward_from(const BasicTensor<T>& x, const BasicTensor<T>& h0, Mode mode) {
  if (x.rank() != 3 || x.dim(2) != input_dim_) {
    throw DimensionError(this->name() + ": expected [B, T, " + std::to_string(input_dim_) + "] input, got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), steps = x.dim(1), n = units_, g3 = 3 * n;
  if (h0.shape() != Shape{batch, n}) {
    throw DimensionError(this->name() + ": initial state must be [B, units], got " + shape_to_string(h0.shape()));
  }

  // Input projections for every (b, t) at once: rows are b * steps + t.
  std::vector<T> xw(batch * steps * g3);
  detail::gemm<T>(false, false, batch * steps, g3, input_dim_, x.data(), kernel.data(), xw.data(), false);
  for (std::size_t row = 0; row < batch * steps; ++row) {
    for (std::size_t j = 0; j < g3; ++j) xw[row * g3 + j] += input_bias[j];
  }

  const bool train = mode == Mode::Train;
  const std::size_t step_len = batch * n;
  if (train) {
    h_prev_.assign(steps * step_len, T(0));
    z_.assign(steps * step_len, T(0));
    r_.assign(steps * step_len, T(0));
    cand_.assign(steps * step_len, T(0));
    rec_cand_.assign(steps * step_len, T(0));
  }

  BasicTensor<T> y = return_sequences_ ? BasicTensor<T>({batch, steps, n}) : BasicTensor<T>({batch, n});
  std::vector<T> h(h0.values().begin(), h0.values().end());
  std::vector<T> hu(batch * g3);
  for (std::size_t t = 0; t < steps; ++t) {
    detail::gemm<T>(false, false, batch, g3, n, h.data(), recurrent_kernel.data(), hu.data(), false);
    for (std::size_t b = 0; b < batch; ++b) {
      const T* xr = xw.data() + (b * steps + t) * g3;
      const T* hr = hu.data() + b * g3;
      for (std::size_t j = 0; j < n; ++j) {
        const T z = sigmoid(xr[j] + hr[j] + recurrent_bias[j]);
        const T r = sigmoid(xr[n + j] + hr[n + j] + recurrent_bias[n + j]);
        const T rc = hr[2 * n + j] + recurrent_bias[2 * n + j];
        const T c = std::tanh(xr[2 * n + j] + r * rc);
        const std::size_t idx = b * n + j;
        if (train) {
          const std::size_t ci = t * step_len + idx;
          h_prev_[ci] = h[idx];
          z_[ci] = z;
          r_[ci] = r;
          cand_[ci] = c;
          rec_cand_[ci] = rc;
        }
        h[idx] = (T(1) - z) * c + z * h[idx];
      }
    }
    if (return_sequences_) {
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy(h.begin() + b * n, h.begin() + (b + 1) * n, y.data() + (b * steps + t) * n);
      }
    }
  }
  if (!return_sequences_) std::copy(h.begin(), h.end(), y.data());

  if (train) {
    input_ = x;
    output_ = activity_reg.active() ? y : BasicTensor<T>{};
    cached_ = true;
  } else {
    clear_cache();
  }
  return y;
}

template <typename T>
BasicTensor<T> Gru<T>::backward(const BasicTensor<T>& grad_out) {
  require_cache<T>(cached_, this->name());
  const std::size_t batch = input_.dim(0), steps = input_.dim(1), n = units_, g3 = 3 * n;
  const Shape expected = return_sequences_ ? Shape{batch, steps, n} : Shape{batch, n};
  if (grad_out.shape() != expected) {
    throw DimensionError(this->name() + ": grad_out shape " + shape_to_string(grad_out.shape()));
  }
  BasicTensor<T> g = grad_out;
  if (activity_reg.active()) add_regularizer_grad(activity_reg, output_, g, 1.0 / double(batch));

  const std::size_t step_len = batch * n;
  std::vector<T> dxw(batch * steps * g3, T(0));
  std::vector<T> dhu(batch * g3);
  std::vector<T> dh(step_len, T(0));
  std::vector<T> dh_prev(step_len);
  if (!return_sequences_) std::copy(g.values().begin(), g.values().end(), dh.begin());

  recurrent_kernel_grad.fill(T(0));
  recurrent_bias_grad.fill(T(0));
  for (std::size_t t = steps; t-- > 0;) {
    if (return_sequences_) {
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < n; ++j) dh[b * n + j] += g[(b * steps + t) * n + j];
      }
    }
    for (std::size_t b = 0; b < batch; ++b) {
      T* dxr = dxw.data() + (b * steps + t) * g3;
      T* dhr = dhu.data() + b * g3;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx = b * n + j;
        const std::size_t ci = t * step_len + idx;
        const T z = z_[ci], r = r_[ci], c = cand_[ci], rc = rec_cand_[ci], hp = h_prev_[ci];
        const T d = dh[idx];
        const T dz = d * (hp - c);
        const T dc = d * (T(1) - z);
        const T dac = dc * (T(1) - c * c);
        const T dar = dac * rc * r * (T(1) - r);
        const T daz = dz * z * (T(1) - z);
        dxr[j] = daz;
        dxr[n + j] = dar;
        dxr[2 * n + j] = dac;
        dhr[j] = daz;
        dhr[n + j] = dar;
        dhr[2 * n + j] = dac * r;
        dh_prev[idx] = d * z;
      }
    }
    detail::gemm<T>(true, false, n, g3, batch, h_prev_.data() + t * step_len, dhu.data(),
                    recurrent_kernel_grad.data(), true);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < g3; ++j) recurrent_bias_grad[j] += dhu[b * g3 + j];
    }
    detail::gemm<T>(false, true, batch, n, g3, dhu.data(), recurrent_kernel.data(), dh_prev.data(), true);
    std::swap(dh, dh_prev);
  }

  detail::gemm<T>(true, false, input_dim_, g3, batch * steps, input_.data(), dxw.data(), kernel_grad.data(),
                  false);
  input_bias_grad.fill(T(0));
  for (std::size_t row = 0; row < batch * steps; ++row) {
    for (std::size_t j = 0; j < g3; ++j) input_bias_grad[j] += dxw[row * g3 + j];
  }
  add_regularizer_grad(kernel_reg, kernel, kernel_grad);
  add_regularizer_grad(kernel_reg, recurrent_kernel, recurrent_kernel_grad);

  BasicTensor<T> grad_in({batch, steps, input_dim_});
  detail::gemm<T>(false, true, batch * steps, input_dim_, g3, dxw.data(), kernel.data(), grad_in.data(), false);
  return grad_in;
}

template <typename T>
std::vector<ParamRef<T>> Gru<T>::params() {
  return {{"kernel", &kernel, &kernel_grad},
          {"recurrent_kernel", &recurrent_kernel, &recurrent_kernel_grad},
          {"input_bias", &input_bias, &input_bias_grad},
          {"recurrent_bias", &recurrent_bias, &recurrent_bias_grad}};
}

template <typename T>
double Gru<T>::penalty() const {
  double total = regularizer_value(kernel_reg, kernel) + regularizer_value(kernel_reg, recurrent_kernel);
  if (activity_reg.active()) {
    if (!cached_) throw StateError(this->name() + ": activity penalty needs a train-mode forward");
    total += regularizer_value(activity_reg, output_) / static_cast<double>(input_.dim(0));
  }
  return total;
}

template <typename T>
void Gru<T>::clear_cache() {
  input_ = {};
  output_ = {};
  h_prev_.clear();
  z_.clear();
  r_.clear();
  cand_.clear();
  rec_cand_.clear();
  cached_ = false;
}

// ---- Dense ----

template <typename T>
Dense<T>::Dense(std::string name, std::size_t in, std::size_t out, std::string label)
    : Layer<T>(std::move(name)),
      weights({in, out}),
      bias({out}),
      weights_grad({in, out}),
      bias_grad({out}),
      label_(std::move(label)) {}

template <typename T>
std::string Dense<T>::label() const {
  if (!label_.empty()) return label_;
  return "FC (" + std::to_string(weights.dim(1)) + ")";
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != weights.dim(0)) {
    throw DimensionError(this->name() + ": expected (" + std::to_string(weights.dim(0)) + ") input, got " +
                         shape_to_string(input));
  }
  return {weights.dim(1)};
}

template <typename T>
BasicTensor<T> Dense<T>::forward(const BasicTensor<T>& x, Mode mode, Rng&) {
  const std::size_t in = weights.dim(0), out = weights.dim(1);
  if (x.rank() != 2 || x.dim(1) != in) {
    throw DimensionError(this->name() + ": expected [B, " + std::to_string(in) + "] input, got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  BasicTensor<T> y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) std::copy(bias.data(), bias.data() + out, y.data() + b * out);
  detail::gemm<T>(false, false, batch, out, in, x.data(), weights.data(), y.data(), true);
  if (mode == Mode::Train) {
    input_ = x;
    cached_ = true;
  } else {
    clear_cache();
  }
  return y;
}

template <typename T>
BasicTensor<T> Dense<T>::backward(const BasicTensor<T>& grad_out) {
  require_cache<T>(cached_, this->name());
  const std::size_t in = weights.dim(0), out = weights.dim(1), batch = input_.dim(0);
  if (grad_out.shape() != Shape{batch, out}) {
    throw DimensionError(this->name() + ": grad_out shape " + shape_to_string(grad_out.shape()));
  }
  detail::gemm<T>(true, false, in, out, batch, input_.data(), grad_out.data(), weights_grad.data(), false);
  bias_grad.fill(T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) bias_grad[o] += grad_out[b * out + o];
  }
  BasicTensor<T> grad_in({batch, in});
  detail::gemm<T>(false, true, batch, in, out, grad_out.data(), weights.data(), grad_in.data(), false);
  return grad_in;
}

template <typename T>
std::vector<ParamRef<T>> Dense<T>::params() {
  return {{"kernel", &weights, &weights_grad}, {"bias", &bias, &bias_grad}};
}

template <typename T>
void Dense<T>::clear_cache() {
  input_ = {};
  cached_ = false;
}

// ---- softmax / loss ----

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() < 1) throw DimensionError("softmax of an empty tensor");
  const std::size_t k = logits.shape().back();
  const std::size_t rows = logits.size() / k;
  BasicTensor<T> p(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = logits.data() + r * k;
    T* out = p.data() + r * k;
    const T peak = *std::max_element(in, in + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(in[j] - peak));
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = static_cast<T>(std::exp(static_cast<double>(in[j] - peak)) / sum);
    }
  }
  return p;
}

template <typename T>
double cross_entropy_loss(const BasicTensor<T>& probs, const BasicTensor<T>& targets) {
  if (probs.rank() != 2 || probs.shape() != targets.shape()) {
    throw DimensionError("cross_entropy_loss shape mismatch: " + shape_to_string(probs.shape()) + " vs " +
                         shape_to_string(targets.shape()));
  }
  const std::size_t batch = probs.dim(0), k = probs.dim(1);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = targets[b * k + j];
      if (d != 0.0) total -= d * std::log(std::max(static_cast<double>(probs[b * k + j]), 1e-12));
    }
  }
  return total / static_cast<double>(batch);
}

template <typename T>
BasicTensor<T> softmax_cross_entropy_grad(const BasicTensor<T>& probs, const BasicTensor<T>& targets) {
  if (probs.rank() != 2 || probs.shape() != targets.shape()) {
    throw DimensionError("softmax_cross_entropy_grad shape mismatch: " + shape_to_string(probs.shape()) +
                         " vs " + shape_to_string(targets.shape()));
  }
  const T inv_batch = T(1) / static_cast<T>(probs.dim(0));
  BasicTensor<T> g(probs.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (probs[i] - targets[i]) * inv_batch;
  return g;
}

#define AZARNET_INSTANTIATE(T)                                                              \
  template class Conv2d<T>;                                                                 \
  template class MaxPool2x2<T>;                                                             \
  template class BatchNorm<T>;                                                              \
  template class Dropout<T>;                                                                \
  template class LeakyRelu<T>;                                                              \
  template class Reshape<T>;                                                                \
  template class Gru<T>;                                                                    \
  template class Dense<T>;                                                                  \
  template BasicTensor<T> leaky_relu(const BasicTensor<T>&, double);                        \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                   \
  template double cross_entropy_loss(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template BasicTensor<T> softmax_cross_entropy_grad(const BasicTensor<T>&,                 \
                                                     const BasicTensor<T>&);                \
  template double regularizer_value(const Regularizer&, const BasicTensor<T>&);             \
  template void glorot_uniform(BasicTensor<T>&, std::size_t, std::size_t, Rng&);

AZARNET_INSTANTIATE(float)
AZARNET_INSTANTIATE(double)
#undef AZARNET_INSTANTIATE

}  // namespace azarnet
