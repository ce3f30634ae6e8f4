/* Copyright 2026 The PotQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "potq/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "potq/errors.h"

namespace potq {

namespace {

void add_into(std::vector<float>& grad, std::size_t i, double v) {
  grad[i] += static_cast<float>(v);
}

std::size_t checked_label(int label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw InputError("label " + std::to_string(label) + " outside [0," +
                     std::to_string(classes) + ")");
  }
  return static_cast<std::size_t>(label);
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2) throw DimensionError("linear expects x[N,I] and w[O,I]");
  const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (w.dim(1) != in) {
    throw DimensionError("linear: input features " + std::to_string(in) +
                         " do not match weight " + shape_to_string(w.shape()));
  }
  const bool has_bias = b.defined();
  if (has_bias && (b.rank() != 1 || b.dim(0) != out)) {
    throw DimensionError("linear: bias shape " + shape_to_string(b.shape()));
  }

  std::vector<float> y(n * out);
  auto xd = x.data();
  auto wd = w.data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) {
        acc += static_cast<double>(xd[r * in + i]) * wd[o * in + i];
      }
      if (has_bias) acc += b.data()[o];
      y[r * out + o] = static_cast<float>(acc);
    }
  }

  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  auto xi = x.impl(), wi = w.impl();
  auto bi = has_bias ? b.impl() : nullptr;
  return Tensor::make_result(
      {n, out}, std::move(y), std::move(inputs),
      [xi, wi, bi, n, in, out](const detail::TensorImpl& res) {
        const auto& dy = res.grad;
        if (xi->requires_grad) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t i = 0; i < in; ++i) {
              double acc = 0.0;
              for (std::size_t o = 0; o < out; ++o) {
                acc += static_cast<double>(dy[r * out + o]) * wi->data[o * in + i];
              }
              add_into(xi->grad, r * in + i, acc);
            }
          }
        }
        if (wi->requires_grad) {
          for (std::size_t o = 0; o < out; ++o) {
            for (std::size_t i = 0; i < in; ++i) {
              double acc = 0.0;
              for (std::size_t r = 0; r < n; ++r) {
                acc += static_cast<double>(dy[r * out + o]) * xi->data[r * in + i];
              }
              add_into(wi->grad, o * in + i, acc);
            }
          }
        }
        if (bi && bi->requires_grad) {
          for (std::size_t o = 0; o < out; ++o) {
            double acc = 0.0;
            for (std::size_t r = 0; r < n; ++r) acc += dy[r * out + o];
            add_into(bi->grad, o, acc);
          }
        }
      });
}

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, Conv2dGeometry g) {
  if (g.stride == 0) throw DimensionError("conv2d: stride must be positive");
  if (kernel == 0 || kernel > input + 2 * g.padding) {
    throw DimensionError("conv2d: kernel " + std::to_string(kernel) +
                         " does not fit input " + std::to_string(input) + " with padding " +
                         std::to_string(g.padding));
  }
  return (input + 2 * g.padding - kernel) / g.stride + 1;
}

namespace {

struct ConvDims {
  std::size_t n, c, h, w, f, kh, kw, oh, ow;
  std::size_t k() const { return c * kh * kw; }
  std::size_t p() const { return oh * ow; }
};

// Column matrix [K, P] for one sample; out-of-bounds taps are zero.
void im2col(const float* x, const ConvDims& d, Conv2dGeometry g, float* col) {
  const std::size_t p_count = d.p();
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        float* row = col + ((c * d.kh + ky) * d.kw + kx) * p_count;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(d.h) &&
                                ix < static_cast<long>(d.w);
            row[oy * d.ow + ox] = inside ? x[(c * d.h + iy) * d.w + ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const double* dcol, const ConvDims& d, Conv2dGeometry g, double* dx) {
  const std::size_t p_count = d.p();
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        const double* row = dcol + ((c * d.kh + ky) * d.kw + kx) * p_count;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
            dx[(c * d.h + iy) * d.w + ix] += row[oy * d.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dGeometry g) {
  if (x.rank() != 4 || w.rank() != 4) {
    throw DimensionError("conv2d expects x[N,C,H,W] and w[F,C,KH,KW]");
  }
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), 0, 0};
  if (w.dim(1) != d.c) {
    throw DimensionError("conv2d: input channels " + std::to_string(d.c) +
                         " do not match weight " + shape_to_string(w.shape()));
  }
  d.oh = conv_output_extent(d.h, d.kh, g);
  d.ow = conv_output_extent(d.w, d.kw, g);
  const bool has_bias = b.defined();
  if (has_bias && (b.rank() != 1 || b.dim(0) != d.f)) {
    throw DimensionError("conv2d: bias shape " + shape_to_string(b.shape()));
  }

  const std::size_t k_count = d.k(), p_count = d.p();
  auto cols = std::make_shared<std::vector<float>>(d.n * k_count * p_count);
  std::vector<float> y(d.n * d.f * p_count);
  std::vector<double> acc(p_count);
  auto xd = x.data();
  auto wd = w.data();
  for (std::size_t s = 0; s < d.n; ++s) {
    float* col = cols->data() + s * k_count * p_count;
    im2col(xd.data() + s * d.c * d.h * d.w, d, g, col);
    for (std::size_t f = 0; f < d.f; ++f) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < k_count; ++k) {
        const double wv = wd[f * k_count + k];
        const float* row = col + k * p_count;
        for (std::size_t p = 0; p < p_count; ++p) acc[p] += wv * row[p];
      }
      const double bias = has_bias ? b.data()[f] : 0.0;
      float* out = y.data() + (s * d.f + f) * p_count;
      for (std::size_t p = 0; p < p_count; ++p) out[p] = static_cast<float>(acc[p] + bias);
    }
  }

  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  auto xi = x.impl(), wi = w.impl();
  auto bi = has_bias ? b.impl() : nullptr;
  return Tensor::make_result(
      {d.n, d.f, d.oh, d.ow}, std::move(y), std::move(inputs),
      [xi, wi, bi, d, g, cols](const detail::TensorImpl& res) {
        const std::size_t k_count = d.k(), p_count = d.p();
        const auto& dy = res.grad;
        std::vector<double> dw(wi->requires_grad ? d.f * k_count : 0, 0.0);
        std::vector<double> db(bi && bi->requires_grad ? d.f : 0, 0.0);
        std::vector<double> dcol(xi->requires_grad ? k_count * p_count : 0);
        std::vector<double> dx(xi->requires_grad ? d.c * d.h * d.w : 0);
        for (std::size_t s = 0; s < d.n; ++s) {
          const float* col = cols->data() + s * k_count * p_count;
          const float* dys = dy.data() + s * d.f * p_count;
          if (!dw.empty()) {
            for (std::size_t f = 0; f < d.f; ++f) {
              const float* dyf = dys + f * p_count;
              for (std::size_t k = 0; k < k_count; ++k) {
                const float* row = col + k * p_count;
                double acc = 0.0;
                for (std::size_t p = 0; p < p_count; ++p) acc += static_cast<double>(dyf[p]) * row[p];
                dw[f * k_count + k] += acc;
              }
            }
          }
          if (!db.empty()) {
            for (std::size_t f = 0; f < d.f; ++f) {
              double acc = 0.0;
              for (std::size_t p = 0; p < p_count; ++p) acc += dys[f * p_count + p];
              db[f] += acc;
            }
          }
          if (!dcol.empty()) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            for (std::size_t f = 0; f < d.f; ++f) {
              const float* dyf = dys + f * p_count;
              for (std::size_t k = 0; k < k_count; ++k) {
                const double wv = wi->data[f * k_count + k];
                double* drow = dcol.data() + k * p_count;
                for (std::size_t p = 0; p < p_count; ++p) drow[p] += wv * dyf[p];
              }
            }
            std::fill(dx.begin(), dx.end(), 0.0);
            col2im_add(dcol.data(), d, g, dx.data());
            float* gx = xi->grad.data() + s * d.c * d.h * d.w;
            for (std::size_t i = 0; i < dx.size(); ++i) gx[i] += static_cast<float>(dx[i]);
          }
        }
        for (std::size_t i = 0; i < dw.size(); ++i) add_into(wi->grad, i, dw[i]);
        for (std::size_t i = 0; i < db.size(); ++i) add_into(bi->grad, i, db[i]);
      });
}

Tensor relu(const Tensor& x) {
  auto xd = x.data();
  std::vector<float> y(xd.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xd[i] > 0.0f ? xd[i] : 0.0f;
  auto xi = x.impl();
  return Tensor::make_result(x.shape(), std::move(y), {x}, [xi](const detail::TensorImpl& res) {
    for (std::size_t i = 0; i < res.grad.size(); ++i) {
      if (xi->data[i] > 0.0f) xi->grad[i] += res.grad[i];
    }
  });
}

Tensor max_pool2d(const Tensor& x, std::size_t size) {
  if (x.rank() != 4) throw DimensionError("max_pool2d expects x[N,C,H,W]");
  if (size == 0 || size > x.dim(2) || size > x.dim(3)) {
    throw DimensionError("max_pool2d: window " + std::to_string(size) + " does not fit " +
                         shape_to_string(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / size, ow = w / size;
  std::vector<float> y(n * c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  auto xd = x.data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = plane * h * w + (oy * size) * w + ox * size;
        for (std::size_t ky = 0; ky < size; ++ky) {
          for (std::size_t kx = 0; kx < size; ++kx) {
            const std::size_t idx = plane * h * w + (oy * size + ky) * w + ox * size + kx;
            if (xd[idx] > xd[best]) best = idx;
          }
        }
        const std::size_t o = (plane * oh + oy) * ow + ox;
        y[o] = xd[best];
        (*argmax)[o] = best;
      }
    }
  }
  auto xi = x.impl();
  return Tensor::make_result({n, c, oh, ow}, std::move(y), {x},
                             [xi, argmax](const detail::TensorImpl& res) {
                               for (std::size_t o = 0; o < res.grad.size(); ++o) {
                                 xi->grad[(*argmax)[o]] += res.grad[o];
                               }
                             });
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("flatten expects at least a batch and one feature axis");
  const std::size_t n = x.dim(0);
  const std::size_t rest = x.numel() / n;
  auto xi = x.impl();
  return Tensor::make_result({n, rest}, std::vector<float>(x.data().begin(), x.data().end()), {x},
                             [xi](const detail::TensorImpl& res) {
                               for (std::size_t i = 0; i < res.grad.size(); ++i) {
                                 xi->grad[i] += res.grad[i];
                               }
                             });
}

Tensor channel_scale(const Tensor& x, const Tensor& gain) {
  if (x.rank() < 2 || gain.rank() != 1 || gain.dim(0) != x.dim(1)) {
    throw DimensionError("channel_scale: gain " + shape_to_string(gain.shape()) +
                         " does not match input " + shape_to_string(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t inner = x.numel() / (n * c);
  auto xd = x.data();
  auto gd = gain.data();
  std::vector<float> y(xd.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xd[i] * gd[(i / inner) % c];
  auto xi = x.impl(), gi = gain.impl();
  return Tensor::make_result(
      x.shape(), std::move(y), {x, gain}, [xi, gi, c, inner](const detail::TensorImpl& res) {
        std::vector<double> dg(c, 0.0);
        for (std::size_t i = 0; i < res.grad.size(); ++i) {
          const std::size_t ch = (i / inner) % c;
          if (xi->requires_grad) xi->grad[i] += res.grad[i] * gi->data[ch];
          dg[ch] += static_cast<double>(res.grad[i]) * xi->data[i];
        }
        if (gi->requires_grad) {
          for (std::size_t ch = 0; ch < c; ++ch) add_into(gi->grad, ch, dg[ch]);
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  auto ad = a.data();
  auto bd = b.data();
  std::vector<float> y(ad.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ad[i] * bd[i];
  auto ai = a.impl(), bi = b.impl();
  return Tensor::make_result(a.shape(), std::move(y), {a, b},
                             [ai, bi](const detail::TensorImpl& res) {
                               for (std::size_t i = 0; i < res.grad.size(); ++i) {
                                 if (ai->requires_grad) ai->grad[i] += res.grad[i] * bi->data[i];
                                 if (bi->requires_grad) bi->grad[i] += res.grad[i] * ai->data[i];
                               }
                             });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  auto xi = x.impl();
  return Tensor::make_result({1}, {static_cast<float>(acc)}, {x},
                             [xi](const detail::TensorImpl& res) {
                               for (float& g : xi->grad) g += res.grad[0];
                             });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy expects logits[N,K]");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  auto ld = logits.data();
  auto probs = std::make_shared<std::vector<double>>(n * k);
  auto targets = std::make_shared<std::vector<std::size_t>>(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t t = checked_label(labels[r], k);
    (*targets)[r] = t;
    const float* row = ld.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) (*probs)[r * k + j] = std::exp(row[j] - log_z);
    total += log_z - row[t];
  }
  auto li = logits.impl();
  return Tensor::make_result({1}, {static_cast<float>(total / n)}, {logits},
                             [li, probs, targets, n, k](const detail::TensorImpl& res) {
                               const double scale = res.grad[0] / static_cast<double>(n);
                               for (std::size_t r = 0; r < n; ++r) {
                                 for (std::size_t j = 0; j < k; ++j) {
                                   double g = (*probs)[r * k + j];
                                   if (j == (*targets)[r]) g -= 1.0;
                                   li->grad[r * k + j] += static_cast<float>(g * scale);
                                 }
                               }
                             });
}

}  // namespace potq
