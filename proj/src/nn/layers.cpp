#include "neuroscan/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "neuroscan/error.hpp"

namespace neuroscan::nn {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMatrix>;
using ConstMapRM = Eigen::Map<const RowMatrix>;

// Upper bound on im2col scratch per GEMM, in floats (~64 MiB).
constexpr std::size_t kColumnBudget = std::size_t{16} << 20;

int conv_out(int in, int k, int stride, int pad_a, int pad_b) { return (in + pad_a + pad_b - k) / stride + 1; }

// Columns for images [n0, n0+count): rows = (c, ky, kx), cols = (n, oy, ox).
void im2col(const Tensor& x, int n0, int count, int k, int stride, const Padding& pad, int out_h, int out_w,
            RowMatrix& cols) {
  const int c_in = x.shape.c;
  const int in_h = x.shape.h;
  const int in_w = x.shape.w;
  const std::size_t hw_out = static_cast<std::size_t>(out_h) * out_w;
  cols.resize(static_cast<Eigen::Index>(c_in) * k * k, static_cast<Eigen::Index>(count * hw_out));
  for (int c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        for (int i = 0; i < count; ++i) {
          const float* src = x.data.data() + x.offset(n0 + i, c, 0, 0);
          float* dst = row + i * hw_out;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad.top + ky;
            float* drow = dst + static_cast<std::size_t>(oy) * out_w;
            if (iy < 0 || iy >= in_h) {
              std::fill(drow, drow + out_w, 0.0F);
              continue;
            }
            const float* srow = src + static_cast<std::size_t>(iy) * in_w;
            if (stride == 1) {
              const int shift = kx - pad.left;
              const int lo = std::min(std::max(0, -shift), out_w);
              const int hi = std::max(std::min(out_w, in_w - shift), lo);
              std::fill(drow, drow + lo, 0.0F);
              if (hi > lo) std::copy(srow + lo + shift, srow + hi + shift, drow + lo);
              std::fill(drow + hi, drow + out_w, 0.0F);
            } else {
              for (int ox = 0; ox < out_w; ++ox) {
                const int ix = ox * stride - pad.left + kx;
                drow[ox] = (ix >= 0 && ix < in_w) ? srow[ix] : 0.0F;
              }
            }
          }
        }
      }
    }
  }
}

void col2im(const RowMatrix& cols, Tensor& dx, int n0, int count, int k, int stride, const Padding& pad,
            int out_h, int out_w) {
  const int c_in = dx.shape.c;
  const int in_h = dx.shape.h;
  const int in_w = dx.shape.w;
  const std::size_t hw_out = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        for (int i = 0; i < count; ++i) {
          float* dst = dx.data.data() + dx.offset(n0 + i, c, 0, 0);
          const float* src = row + i * hw_out;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad.top + ky;
            if (iy < 0 || iy >= in_h) continue;
            float* drow = dst + static_cast<std::size_t>(iy) * in_w;
            const float* srow = src + static_cast<std::size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride - pad.left + kx;
              if (ix >= 0 && ix < in_w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

int chunk_size(std::size_t rows, std::size_t cols_per_image, int n) {
  const std::size_t per_image = std::max<std::size_t>(1, rows * cols_per_image);
  return static_cast<int>(std::clamp<std::size_t>(kColumnBudget / per_image, 1, static_cast<std::size_t>(n)));
}

void require_cached(const Tensor& t, const char* layer) {
  if (t.empty()) throw std::logic_error(std::string(layer) + ": backward() without a train-mode forward()");
}

}  // namespace

// --- Conv2d -----------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, Padding pad, bool bias)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {bias ? out_channels : 0, 1, 1, 1}),
      in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias) {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0) {
    throw ValidationError("invalid convolution geometry for '" + name + "'");
  }
}

void Conv2d::init(Rng& rng) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_) * k_ * k_));
  for (float& v : weight.value.data) v = static_cast<float>(rng.normal(0.0, stddev));
  bias.value.fill(0.0F);
}

Shape Conv2d::output_shape(const Shape& in) const {
  return {in.n, out_, conv_out(in.h, k_, stride_, pad_.top, pad_.bottom),
          conv_out(in.w, k_, stride_, pad_.left, pad_.right)};
}

Tensor Conv2d::forward(const Tensor& x, Mode mode) {
  if (x.shape.c != in_) {
    throw ShapeError(weight.name + ": expected " + std::to_string(in_) + " input channels, got " + x.shape.str());
  }
  const Shape os = output_shape(x.shape);
  if (os.h <= 0 || os.w <= 0) throw ShapeError(weight.name + ": input " + x.shape.str() + " too small");
  Tensor y(os);
  const std::size_t hw = os.plane();
  const std::size_t k_rows = static_cast<std::size_t>(in_) * k_ * k_;
  const ConstMapRM w(weight.value.data.data(), out_, static_cast<Eigen::Index>(k_rows));
  const int chunk = chunk_size(k_rows, hw, x.shape.n);
  RowMatrix cols;
  RowMatrix res;
  for (int n0 = 0; n0 < x.shape.n; n0 += chunk) {
    const int count = std::min(chunk, x.shape.n - n0);
    im2col(x, n0, count, k_, stride_, pad_, os.h, os.w, cols);
    res.noalias() = w * cols;
    for (int i = 0; i < count; ++i) {
      for (int o = 0; o < out_; ++o) {
        const float b = has_bias_ ? bias.value.data[static_cast<std::size_t>(o)] : 0.0F;
        const float* src = res.row(o).data() + i * hw;
        float* dst = y.data.data() + y.offset(n0 + i, o, 0, 0);
        for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] + b;
      }
    }
  }
  if (mode == Mode::train) {
    cached_input_ = x;
  } else {
    cached_input_ = Tensor{};
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  require_cached(cached_input_, "conv2d");
  const Tensor& x = cached_input_;
  const Shape os = output_shape(x.shape);
  expect_shape(grad_out, os, "conv2d backward");
  const std::size_t hw = os.plane();
  const std::size_t k_rows = static_cast<std::size_t>(in_) * k_ * k_;
  const ConstMapRM w(weight.value.data.data(), out_, static_cast<Eigen::Index>(k_rows));
  MapRM dw(weight.grad.data.data(), out_, static_cast<Eigen::Index>(k_rows));
  Tensor dx(x.shape);
  const int chunk = chunk_size(k_rows, hw, x.shape.n);
  RowMatrix cols;
  RowMatrix dy;
  RowMatrix dcols;
  for (int n0 = 0; n0 < x.shape.n; n0 += chunk) {
    const int count = std::min(chunk, x.shape.n - n0);
    dy.resize(out_, static_cast<Eigen::Index>(count * hw));
    for (int i = 0; i < count; ++i) {
      for (int o = 0; o < out_; ++o) {
        const float* src = grad_out.data.data() + grad_out.offset(n0 + i, o, 0, 0);
        std::copy(src, src + hw, dy.row(o).data() + i * hw);
      }
    }
    if (has_bias_) {
      for (int o = 0; o < out_; ++o) bias.grad.data[static_cast<std::size_t>(o)] += dy.row(o).sum();
    }
    im2col(x, n0, count, k_, stride_, pad_, os.h, os.w, cols);
    dw.noalias() += dy * cols.transpose();
    dcols.noalias() = w.transpose() * dy;
    col2im(dcols, dx, n0, count, k_, stride_, pad_, os.h, os.w);
  }
  return dx;
}

void Conv2d::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (has_bias_) out.push_back(&bias);
}

// --- DepthwiseConv2d --------------------------------------------------------

DepthwiseConv2d::DepthwiseConv2d(std::string name, int channels, int kernel, int stride, Padding pad)
    : weight(name + ".weight", {channels, 1, kernel, kernel}),
      channels_(channels),
      k_(kernel),
      stride_(stride),
      pad_(pad) {
  weight.trainable = false;
}

Tensor DepthwiseConv2d::forward(const Tensor& x, Mode) {
  if (x.shape.c != channels_) throw ShapeError(weight.name + ": channel mismatch " + x.shape.str());
  const int oh = conv_out(x.shape.h, k_, stride_, pad_.top, pad_.bottom);
  const int ow = conv_out(x.shape.w, k_, stride_, pad_.left, pad_.right);
  Tensor y({x.shape.n, channels_, oh, ow});
  for (int n = 0; n < x.shape.n; ++n) {
    for (int c = 0; c < channels_; ++c) {
      const float* wk = weight.value.data.data() + static_cast<std::size_t>(c) * k_ * k_;
      const float* src = x.data.data() + x.offset(n, c, 0, 0);
      float* dst = y.data.data() + y.offset(n, c, 0, 0);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const float wv = wk[ky * k_ + kx];
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_.top + ky;
            if (iy < 0 || iy >= x.shape.h) continue;
            const float* srow = src + static_cast<std::size_t>(iy) * x.shape.w;
            float* drow = dst + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_.left + kx;
              if (ix >= 0 && ix < x.shape.w) drow[ox] += wv * srow[ix];
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor DepthwiseConv2d::backward(const Tensor&) {
  throw std::logic_error("depthwise convolution is inference-only (frozen backbones)");
}

void DepthwiseConv2d::collect(std::vector<Parameter*>& out) { out.push_back(&weight); }

// --- ConvTranspose2x2 -------------------------------------------------------

ConvTranspose2x2::ConvTranspose2x2(std::string name, int in_channels, int out_channels)
    : weight(name + ".weight", {in_channels, out_channels, 2, 2}),
      bias(name + ".bias", {out_channels, 1, 1, 1}),
      in_(in_channels),
      out_(out_channels) {}

void ConvTranspose2x2::init(Rng& rng) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_)));
  for (float& v : weight.value.data) v = static_cast<float>(rng.normal(0.0, stddev));
  bias.value.fill(0.0F);
}

Tensor ConvTranspose2x2::forward(const Tensor& x, Mode mode) {
  if (x.shape.c != in_) throw ShapeError(weight.name + ": channel mismatch " + x.shape.str());
  const int h = x.shape.h;
  const int w = x.shape.w;
  const std::size_t hw = x.shape.plane();
  Tensor y({x.shape.n, out_, 2 * h, 2 * w});
  const ConstMapRM wm(weight.value.data.data(), in_, out_ * 4);
  RowMatrix res;
  for (int n = 0; n < x.shape.n; ++n) {
    const ConstMapRM xm(x.data.data() + x.offset(n, 0, 0, 0), in_, static_cast<Eigen::Index>(hw));
    res.noalias() = wm.transpose() * xm;  // (out*4, hw)
    for (int o = 0; o < out_; ++o) {
      const float b = bias.value.data[static_cast<std::size_t>(o)];
      for (int a = 0; a < 2; ++a) {
        for (int bb = 0; bb < 2; ++bb) {
          const float* src = res.row(o * 4 + a * 2 + bb).data();
          for (int yy = 0; yy < h; ++yy) {
            float* drow = y.data.data() + y.offset(n, o, 2 * yy + a, 0);
            const float* srow = src + static_cast<std::size_t>(yy) * w;
            for (int xx = 0; xx < w; ++xx) drow[2 * xx + bb] = srow[xx] + b;
          }
        }
      }
    }
  }
  cached_input_ = mode == Mode::train ? x : Tensor{};
  return y;
}

Tensor ConvTranspose2x2::backward(const Tensor& grad_out) {
  require_cached(cached_input_, "conv_transpose2x2");
  const Tensor& x = cached_input_;
  const int h = x.shape.h;
  const int w = x.shape.w;
  const std::size_t hw = x.shape.plane();
  expect_shape(grad_out, {x.shape.n, out_, 2 * h, 2 * w}, "conv_transpose2x2 backward");
  Tensor dx(x.shape);
  const ConstMapRM wm(weight.value.data.data(), in_, out_ * 4);
  MapRM dw(weight.grad.data.data(), in_, out_ * 4);
  RowMatrix g(out_ * 4, static_cast<Eigen::Index>(hw));
  for (int n = 0; n < x.shape.n; ++n) {
    for (int o = 0; o < out_; ++o) {
      double bsum = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int bb = 0; bb < 2; ++bb) {
          float* dst = g.row(o * 4 + a * 2 + bb).data();
          for (int yy = 0; yy < h; ++yy) {
            const float* srow = grad_out.data.data() + grad_out.offset(n, o, 2 * yy + a, 0);
            for (int xx = 0; xx < w; ++xx) {
              dst[static_cast<std::size_t>(yy) * w + xx] = srow[2 * xx + bb];
              bsum += srow[2 * xx + bb];
            }
          }
        }
      }
      bias.grad.data[static_cast<std::size_t>(o)] += static_cast<float>(bsum);
    }
    const ConstMapRM xm(x.data.data() + x.offset(n, 0, 0, 0), in_, static_cast<Eigen::Index>(hw));
    dw.noalias() += xm * g.transpose();
    MapRM dxm(dx.data.data() + dx.offset(n, 0, 0, 0), in_, static_cast<Eigen::Index>(hw));
    dxm.noalias() = wm * g;
  }
  return dx;
}

void ConvTranspose2x2::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// --- BatchNorm2d ------------------------------------------------------------

BatchNorm2d::BatchNorm2d(std::string name, int channels, float eps, float momentum)
    : gamma(name + ".gamma", {channels, 1, 1, 1}),
      beta(name + ".beta", {channels, 1, 1, 1}),
      running_mean(name + ".running_mean", {channels, 1, 1, 1}, true),
      running_var(name + ".running_var", {channels, 1, 1, 1}, true),
      channels_(channels),
      eps_(eps),
      momentum_(momentum) {
  gamma.value.fill(1.0F);
  running_var.value.fill(1.0F);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  if (x.shape.c != channels_) throw ShapeError(gamma.name + ": channel mismatch " + x.shape.str());
  const std::size_t hw = x.shape.plane();
  const std::size_t count = hw * static_cast<std::size_t>(x.shape.n);
  Tensor y(x.shape);
  if (mode == Mode::infer) {
    for (int c = 0; c < channels_; ++c) {
      const float inv = 1.0F / std::sqrt(running_var.value.data[c] + eps_);
      const float scale = gamma.value.data[c] * inv;
      const float shift = beta.value.data[c] - running_mean.value.data[c] * scale;
      for (int n = 0; n < x.shape.n; ++n) {
        const float* src = x.data.data() + x.offset(n, c, 0, 0);
        float* dst = y.data.data() + y.offset(n, c, 0, 0);
        for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] * scale + shift;
      }
    }
    cached_xhat_ = Tensor{};
    return y;
  }

  cached_xhat_ = Tensor(x.shape);
  cached_inv_std_.assign(static_cast<std::size_t>(channels_), 0.0F);
  for (int c = 0; c < channels_; ++c) {
    double sum = 0.0;
    double sq = 0.0;
    for (int n = 0; n < x.shape.n; ++n) {
      const float* src = x.data.data() + x.offset(n, c, 0, 0);
      for (std::size_t p = 0; p < hw; ++p) sum += src[p];
    }
    const double mean = sum / static_cast<double>(count);
    for (int n = 0; n < x.shape.n; ++n) {
      const float* src = x.data.data() + x.offset(n, c, 0, 0);
      for (std::size_t p = 0; p < hw; ++p) {
        const double d = src[p] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(count);
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    cached_inv_std_[static_cast<std::size_t>(c)] = inv;
    const float g = gamma.value.data[c];
    const float b = beta.value.data[c];
    const float m = static_cast<float>(mean);
    for (int n = 0; n < x.shape.n; ++n) {
      const float* src = x.data.data() + x.offset(n, c, 0, 0);
      float* xh = cached_xhat_.data.data() + x.offset(n, c, 0, 0);
      float* dst = y.data.data() + y.offset(n, c, 0, 0);
      for (std::size_t p = 0; p < hw; ++p) {
        xh[p] = (src[p] - m) * inv;
        dst[p] = xh[p] * g + b;
      }
    }
    running_mean.value.data[c] = momentum_ * running_mean.value.data[c] + (1.0F - momentum_) * m;
    running_var.value.data[c] = momentum_ * running_var.value.data[c] + (1.0F - momentum_) * static_cast<float>(var);
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  require_cached(cached_xhat_, "batch_norm");
  expect_shape(grad_out, cached_xhat_.shape, "batch_norm backward");
  const Shape s = grad_out.shape;
  const std::size_t hw = s.plane();
  const double count = static_cast<double>(hw) * s.n;
  Tensor dx(s);
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const float* dy = grad_out.data.data() + grad_out.offset(n, c, 0, 0);
      const float* xh = cached_xhat_.data.data() + cached_xhat_.offset(n, c, 0, 0);
      for (std::size_t p = 0; p < hw; ++p) {
        sum_dy += dy[p];
        sum_dy_xhat += static_cast<double>(dy[p]) * xh[p];
      }
    }
    gamma.grad.data[c] += static_cast<float>(sum_dy_xhat);
    beta.grad.data[c] += static_cast<float>(sum_dy);
    const double g = gamma.value.data[c];
    const double inv = cached_inv_std_[static_cast<std::size_t>(c)];
    const double mean_dy = sum_dy / count;
    const double mean_dy_xhat = sum_dy_xhat / count;
    for (int n = 0; n < s.n; ++n) {
      const float* dy = grad_out.data.data() + grad_out.offset(n, c, 0, 0);
      const float* xh = cached_xhat_.data.data() + cached_xhat_.offset(n, c, 0, 0);
      float* out = dx.data.data() + dx.offset(n, c, 0, 0);
      for (std::size_t p = 0; p < hw; ++p) {
        out[p] = static_cast<float>(g * inv * (dy[p] - mean_dy - xh[p] * mean_dy_xhat));
      }
    }
  }
  return dx;
}

void BatchNorm2d::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

// --- ReLU / pooling ---------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, Mode mode) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > 0.0F ? x.data[i] : 0.0F;
  cached_output_ = mode == Mode::train ? y : Tensor{};
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  require_cached(cached_output_, "relu");
  expect_shape(grad_out, cached_output_.shape, "relu backward");
  Tensor dx(grad_out.shape);
  for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] = cached_output_.data[i] > 0.0F ? grad_out.data[i] : 0.0F;
  return dx;
}

Tensor MaxPool2x2::forward(const Tensor& x, Mode mode) {
  const int oh = x.shape.h / 2;
  const int ow = x.shape.w / 2;
  if (oh == 0 || ow == 0) throw ShapeError("max_pool2x2: input " + x.shape.str() + " too small");
  Tensor y({x.shape.n, x.shape.c, oh, ow});
  const bool keep = mode == Mode::train;
  if (keep) argmax_.assign(y.numel(), 0);
  std::size_t k = 0;
  for (int n = 0; n < x.shape.n; ++n) {
    for (int c = 0; c < x.shape.c; ++c) {
      for (int yy = 0; yy < oh; ++yy) {
        for (int xx = 0; xx < ow; ++xx, ++k) {
          std::size_t best = x.offset(n, c, 2 * yy, 2 * xx);
          for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
              const std::size_t idx = x.offset(n, c, 2 * yy + a, 2 * xx + b);
              if (x.data[idx] > x.data[best]) best = idx;
            }
          }
          y.data[k] = x.data[best];
          if (keep) argmax_[k] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  in_shape_ = keep ? x.shape : Shape{};
  return y;
}

Tensor MaxPool2x2::backward(const Tensor& grad_out) {
  if (in_shape_.numel() == 0) throw std::logic_error("max_pool2x2: backward() without a train-mode forward()");
  Tensor dx(in_shape_);
  for (std::size_t k = 0; k < grad_out.data.size(); ++k) dx.data[argmax_[k]] += grad_out.data[k];
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Mode mode) {
  Tensor y({x.shape.n, x.shape.c, 1, 1});
  const std::size_t hw = x.shape.plane();
  for (int n = 0; n < x.shape.n; ++n) {
    for (int c = 0; c < x.shape.c; ++c) {
      const float* src = x.data.data() + x.offset(n, c, 0, 0);
      double s = 0.0;
      for (std::size_t p = 0; p < hw; ++p) s += src[p];
      y.at(n, c, 0, 0) = static_cast<float>(s / static_cast<double>(hw));
    }
  }
  in_shape_ = mode == Mode::train ? x.shape : Shape{};
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  if (in_shape_.numel() == 0) throw std::logic_error("global_avg_pool: backward() without a train-mode forward()");
  Tensor dx(in_shape_);
  const std::size_t hw = in_shape_.plane();
  const float inv = 1.0F / static_cast<float>(hw);
  for (int n = 0; n < in_shape_.n; ++n) {
    for (int c = 0; c < in_shape_.c; ++c) {
      const float g = grad_out.at(n, c, 0, 0) * inv;
      float* dst = dx.data.data() + dx.offset(n, c, 0, 0);
      std::fill(dst, dst + hw, g);
    }
  }
  return dx;
}

// --- Dense / Dropout --------------------------------------------------------

Dense::Dense(std::string name, int in_features, int out_features)
    : weight(name + ".weight", {out_features, in_features, 1, 1}),
      bias(name + ".bias", {out_features, 1, 1, 1}),
      in_(in_features),
      out_(out_features) {
  if (in_features <= 0 || out_features <= 0) throw ValidationError("invalid dense geometry for '" + name + "'");
}

void Dense::init(Rng& rng) {
  const double limit = std::sqrt(6.0 / (static_cast<double>(in_) + out_));
  for (float& v : weight.value.data) v = static_cast<float>(rng.uniform(-limit, limit));
  bias.value.fill(0.0F);
}

Tensor Dense::forward(const Tensor& x, Mode mode) {
  const int features = x.shape.c * x.shape.h * x.shape.w;
  if (features != in_) {
    throw ShapeError(weight.name + ": expected " + std::to_string(in_) + " features, got " + x.shape.str());
  }
  Tensor y({x.shape.n, out_, 1, 1});
  const ConstMapRM w(weight.value.data.data(), out_, in_);
  const ConstMapRM xm(x.data.data(), x.shape.n, in_);
  MapRM ym(y.data.data(), x.shape.n, out_);
  ym.noalias() = xm * w.transpose();
  for (int n = 0; n < x.shape.n; ++n) {
    for (int o = 0; o < out_; ++o) ym(n, o) += bias.value.data[static_cast<std::size_t>(o)];
  }
  cached_input_ = mode == Mode::train ? x : Tensor{};
  return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
  require_cached(cached_input_, "dense");
  const int n = cached_input_.shape.n;
  expect_shape(grad_out, {n, out_, 1, 1}, "dense backward");
  const ConstMapRM w(weight.value.data.data(), out_, in_);
  const ConstMapRM xm(cached_input_.data.data(), n, in_);
  const ConstMapRM g(grad_out.data.data(), n, out_);
  MapRM dw(weight.grad.data.data(), out_, in_);
  dw.noalias() += g.transpose() * xm;
  for (int o = 0; o < out_; ++o) bias.grad.data[static_cast<std::size_t>(o)] += g.col(o).sum();
  Tensor dx(cached_input_.shape);
  MapRM dxm(dx.data.data(), n, in_);
  dxm.noalias() = g * w;
  return dx;
}

void Dense::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Tensor Dropout::forward(const Tensor& x, Mode mode) {
  if (mode == Mode::infer || rate_ <= 0.0F) {
    keep_.assign(x.data.size(), 1.0F);
    return x;
  }
  const float scale = 1.0F / (1.0F - rate_);
  keep_.resize(x.data.size());
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    keep_[i] = rng_.uniform() >= rate_ ? scale : 0.0F;
    y.data[i] = x.data[i] * keep_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (keep_.size() != grad_out.data.size()) throw std::logic_error("dropout: backward() shape mismatch");
  Tensor dx(grad_out.shape);
  for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] = grad_out.data[i] * keep_[i];
  return dx;
}

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  expect_shape(b, a.shape, "add");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape.n != b.shape.n || a.shape.h != b.shape.h || a.shape.w != b.shape.w) {
    throw ShapeError("concat: incompatible shapes " + a.shape.str() + " and " + b.shape.str());
  }
  Tensor out({a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
  for (int n = 0; n < a.shape.n; ++n) {
    const auto sa = a.sample(n);
    const auto sb = b.sample(n);
    auto dst = out.sample(n);
    std::copy(sa.begin(), sa.end(), dst.begin());
    std::copy(sb.begin(), sb.end(), dst.begin() + static_cast<std::ptrdiff_t>(sa.size()));
  }
  return out;
}

void split_channels(const Tensor& g, int c_a, Tensor& ga, Tensor& gb) {
  ga = Tensor({g.shape.n, c_a, g.shape.h, g.shape.w});
  gb = Tensor({g.shape.n, g.shape.c - c_a, g.shape.h, g.shape.w});
  for (int n = 0; n < g.shape.n; ++n) {
    const auto src = g.sample(n);
    auto da = ga.sample(n);
    auto db = gb.sample(n);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(da.size()), da.begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(da.size()), src.end(), db.begin());
  }
}

Tensor softmax(const Tensor& logits) {
  Tensor p(logits.shape);
  const int k = logits.shape.c * logits.shape.h * logits.shape.w;
  for (int n = 0; n < logits.shape.n; ++n) {
    const float* z = logits.data.data() + static_cast<std::size_t>(n) * k;
    float* out = p.data.data() + static_cast<std::size_t>(n) * k;
    const float zmax = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += std::exp(static_cast<double>(z[i]) - zmax);
    for (int i = 0; i < k; ++i) out[i] = static_cast<float>(std::exp(static_cast<double>(z[i]) - zmax) / sum);
  }
  return p;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& grad_probs) {
  expect_shape(grad_probs, probs.shape, "softmax backward");
  Tensor dz(probs.shape);
  const int k = probs.shape.c * probs.shape.h * probs.shape.w;
  for (int n = 0; n < probs.shape.n; ++n) {
    const float* p = probs.data.data() + static_cast<std::size_t>(n) * k;
    const float* g = grad_probs.data.data() + static_cast<std::size_t>(n) * k;
    double dot = 0.0;
    for (int i = 0; i < k; ++i) dot += static_cast<double>(g[i]) * p[i];
    float* out = dz.data.data() + static_cast<std::size_t>(n) * k;
    for (int i = 0; i < k; ++i) out[i] = static_cast<float>(p[i] * (g[i] - dot));
  }
  return dz;
}

Tensor sigmoid(const Tensor& logits) {
  // Keep outputs strictly inside (0, 1) even where float saturates.
  constexpr float lo = 1e-7F;
  constexpr float hi = 1.0F - 1e-7F;
  Tensor p(logits.shape);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double z = logits.data[i];
    p.data[i] = std::clamp(static_cast<float>(1.0 / (1.0 + std::exp(-z))), lo, hi);
  }
  return p;
}

Tensor sigmoid_backward(const Tensor& probs, const Tensor& grad_probs) {
  expect_shape(grad_probs, probs.shape, "sigmoid backward");
  Tensor dz(probs.shape);
  for (std::size_t i = 0; i < dz.data.size(); ++i) {
    const double p = probs.data[i];
    dz.data[i] = static_cast<float>(grad_probs.data[i] * p * (1.0 - p));
  }
  return dz;
}

}  // namespace neuroscan::nn
