// Copyright 2026 The tractdiff Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tractdiff/nn_layers.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tractdiff::nn {
namespace {

struct Dims {
  int64_t b, c, l, h, w;
  int64_t plane() const { return h * w; }
};

template <typename T>
Dims DimsOf(const Tensor<T>& x) {
  if (x.rank() != 5) {
    Fail(ErrorKind::kShapeMismatch,
         "expected [B, C, L, H, W] features, got " + ShapeToString(x.shape()));
  }
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), x.dim(4)};
}

template <typename T>
void RequireChannels(const Dims& d, int channels, const char* layer) {
  if (d.c != channels) {
    Fail(ErrorKind::kShapeMismatch, std::string(layer) + " expects " +
                                        std::to_string(channels) + " channels, got " +
                                        std::to_string(d.c));
  }
}

template <typename T>
T Sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
void InitUniform(Tensor<T>* t, int64_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& v : t->values()) v = static_cast<T>(dist(rng));
}

// ---------------------------------------------------------------- Conv2d3x3

template <typename T>
Conv2d3x3<T>::Conv2d3x3(int in_channels, int out_channels, std::mt19937_64& rng)
    : cin_(in_channels),
      cout_(out_channels),
      weight_("weight", {out_channels, in_channels, 3, 3}),
      bias_("bias", {out_channels}) {
  InitUniform(&weight_.value, in_channels * 9, rng);
  InitUniform(&bias_.value, in_channels * 9, rng);
}

template <typename T>
Tensor<T> Conv2d3x3<T>::Forward(const Tensor<T>& x) {
  const Dims d = DimsOf(x);
  RequireChannels<T>(d, cin_, "Conv2d3x3");
  input_ = x;
  Tensor<T> y({d.b, cout_, d.l, d.h, d.w});
  const int64_t hw = d.plane();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t co = 0; co < cout_; ++co) {
      for (int64_t l = 0; l < d.l; ++l) {
        T* yp = y.data() + ((b * cout_ + co) * d.l + l) * hw;
        std::fill(yp, yp + hw, bias_.value[co]);
        for (int64_t ci = 0; ci < cin_; ++ci) {
          const T* xp = x.data() + ((b * cin_ + ci) * d.l + l) * hw;
          const T* wp = weight_.value.data() + (co * cin_ + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int64_t dy = ky - 1;
            const int64_t y0 = std::max<int64_t>(0, -dy), y1 = std::min(d.h, d.h - dy);
            for (int kx = 0; kx < 3; ++kx) {
              const int64_t dx = kx - 1;
              const int64_t x0 = std::max<int64_t>(0, -dx), x1 = std::min(d.w, d.w - dx);
              const T wv = wp[ky * 3 + kx];
              for (int64_t yy = y0; yy < y1; ++yy) {
                T* yr = yp + yy * d.w;
                const T* xr = xp + (yy + dy) * d.w + dx;
                for (int64_t xx = x0; xx < x1; ++xx) yr[xx] += wv * xr[xx];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d3x3<T>::Backward(const Tensor<T>& grad_out) {
  const Dims d = DimsOf(input_);
  Tensor<T> gx(input_.shape());
  const int64_t hw = d.plane();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t co = 0; co < cout_; ++co) {
      for (int64_t l = 0; l < d.l; ++l) {
        const T* gp = grad_out.data() + ((b * cout_ + co) * d.l + l) * hw;
        T gb = 0;
        for (int64_t i = 0; i < hw; ++i) gb += gp[i];
        bias_.grad[co] += gb;
        for (int64_t ci = 0; ci < cin_; ++ci) {
          const T* xp = input_.data() + ((b * cin_ + ci) * d.l + l) * hw;
          T* gxp = gx.data() + ((b * cin_ + ci) * d.l + l) * hw;
          const T* wp = weight_.value.data() + (co * cin_ + ci) * 9;
          T* gwp = weight_.grad.data() + (co * cin_ + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int64_t dy = ky - 1;
            const int64_t y0 = std::max<int64_t>(0, -dy), y1 = std::min(d.h, d.h - dy);
            for (int kx = 0; kx < 3; ++kx) {
              const int64_t dx = kx - 1;
              const int64_t x0 = std::max<int64_t>(0, -dx), x1 = std::min(d.w, d.w - dx);
              const T wv = wp[ky * 3 + kx];
              T gw = 0;
              for (int64_t yy = y0; yy < y1; ++yy) {
                const T* gr = gp + yy * d.w;
                const T* xr = xp + (yy + dy) * d.w + dx;
                T* gxr = gxp + (yy + dy) * d.w + dx;
                for (int64_t xx = x0; xx < x1; ++xx) {
                  gw += gr[xx] * xr[xx];
                  gxr[xx] += wv * gr[xx];
                }
              }
              gwp[ky * 3 + kx] += gw;
            }
          }
        }
      }
    }
  }
  return gx;
}

// ------------------------------------------------------------ TemporalConv3

template <typename T>
TemporalConv3<T>::TemporalConv3(int in_channels, int out_channels, std::mt19937_64& rng)
    : cin_(in_channels),
      cout_(out_channels),
      weight_("weight", {out_channels, in_channels, 3}),
      bias_("bias", {out_channels}) {
  InitUniform(&weight_.value, in_channels * 3, rng);
  InitUniform(&bias_.value, in_channels * 3, rng);
}

template <typename T>
Tensor<T> TemporalConv3<T>::Forward(const Tensor<T>& x) {
  const Dims d = DimsOf(x);
  RequireChannels<T>(d, cin_, "TemporalConv3");
  input_ = x;
  Tensor<T> y({d.b, cout_, d.l, d.h, d.w});
  const int64_t hw = d.plane();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t co = 0; co < cout_; ++co) {
      T* yc = y.data() + (b * cout_ + co) * d.l * hw;
      std::fill(yc, yc + d.l * hw, bias_.value[co]);
      for (int64_t ci = 0; ci < cin_; ++ci) {
        const T* xc = x.data() + (b * cin_ + ci) * d.l * hw;
        for (int k = 0; k < 3; ++k) {
          const T wv = weight_.value[(co * cin_ + ci) * 3 + k];
          for (int64_t l = 0; l < d.l; ++l) {
            const int64_t src = l + k - 1;
            if (src < 0 || src >= d.l) continue;
            T* yp = yc + l * hw;
            const T* xp = xc + src * hw;
            for (int64_t i = 0; i < hw; ++i) yp[i] += wv * xp[i];
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> TemporalConv3<T>::Backward(const Tensor<T>& grad_out) {
  const Dims d = DimsOf(input_);
  Tensor<T> gx(input_.shape());
  const int64_t hw = d.plane();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t co = 0; co < cout_; ++co) {
      const T* gc = grad_out.data() + (b * cout_ + co) * d.l * hw;
      T gb = 0;
      for (int64_t i = 0; i < d.l * hw; ++i) gb += gc[i];
      bias_.grad[co] += gb;
      for (int64_t ci = 0; ci < cin_; ++ci) {
        const T* xc = input_.data() + (b * cin_ + ci) * d.l * hw;
        T* gxc = gx.data() + (b * cin_ + ci) * d.l * hw;
        for (int k = 0; k < 3; ++k) {
          const T wv = weight_.value[(co * cin_ + ci) * 3 + k];
          T gw = 0;
          for (int64_t l = 0; l < d.l; ++l) {
            const int64_t src = l + k - 1;
            if (src < 0 || src >= d.l) continue;
            const T* gp = gc + l * hw;
            const T* xp = xc + src * hw;
            T* gxp = gxc + src * hw;
            for (int64_t i = 0; i < hw; ++i) {
              gw += gp[i] * xp[i];
              gxp[i] += wv * gp[i];
            }
          }
          weight_.grad[(co * cin_ + ci) * 3 + k] += gw;
        }
      }
    }
  }
  return gx;
}

// ------------------------------------------------------------------ Conv1x1

template <typename T>
Conv1x1<T>::Conv1x1(int in_channels, int out_channels, std::mt19937_64& rng)
    : cin_(in_channels),
      cout_(out_channels),
      weight_("weight", {out_channels, in_channels}),
      bias_("bias", {out_channels}) {
  InitUniform(&weight_.value, in_channels, rng);
  InitUniform(&bias_.value, in_channels, rng);
}

template <typename T>
Tensor<T> Conv1x1<T>::Forward(const Tensor<T>& x) {
  const Dims d = DimsOf(x);
  RequireChannels<T>(d, cin_, "Conv1x1");
  input_ = x;
  Tensor<T> y({d.b, cout_, d.l, d.h, d.w});
  const int64_t n = d.l * d.plane();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t co = 0; co < cout_; ++co) {
      T* yp = y.data() + (b * cout_ + co) * n;
      std::fill(yp, yp + n, bias_.value[co]);
      for (int64_t ci = 0; ci < cin_; ++ci) {
        const T wv = weight_.value[co * cin_ + ci];
        const T* xp = x.data() + (b * cin_ + ci) * n;
        for (int64_t i = 0; i < n; ++i) yp[i] += wv * xp[i];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv1x1<T>::Backward(const Tensor<T>& grad_out) {
  const Dims d = DimsOf(input_);
  Tensor<T> gx(input_.shape());
  const int64_t n = d.l * d.plane();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t co = 0; co < cout_; ++co) {
      const T* gp = grad_out.data() + (b * cout_ + co) * n;
      T gb = 0;
      for (int64_t i = 0; i < n; ++i) gb += gp[i];
      bias_.grad[co] += gb;
      for (int64_t ci = 0; ci < cin_; ++ci) {
        const T wv = weight_.value[co * cin_ + ci];
        const T* xp = input_.data() + (b * cin_ + ci) * n;
        T* gxp = gx.data() + (b * cin_ + ci) * n;
        T gw = 0;
        for (int64_t i = 0; i < n; ++i) {
          gw += gp[i] * xp[i];
          gxp[i] += wv * gp[i];
        }
        weight_.grad[co * cin_ + ci] += gw;
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------- GroupNorm

template <typename T>
GroupNorm<T>::GroupNorm(int channels, int groups)
    : channels_(channels),
      groups_(groups),
      gamma_("gamma", {channels}),
      beta_("beta", {channels}) {
  if (groups < 1 || channels % groups != 0) {
    Fail(ErrorKind::kBadArgument, "GroupNorm: " + std::to_string(channels) +
                                      " channels not divisible into " +
                                      std::to_string(groups) + " groups");
  }
  gamma_.value.Fill(T(1));
}

template <typename T>
Tensor<T> GroupNorm<T>::Forward(const Tensor<T>& x) {
  const Dims d = DimsOf(x);
  RequireChannels<T>(d, channels_, "GroupNorm");
  constexpr double kEps = 1e-5;
  const int64_t per_group = channels_ / groups_;
  const int64_t chan_size = d.l * d.plane();
  const int64_t n = per_group * chan_size;
  normalized_ = Tensor<T>(x.shape());
  inv_std_.assign(d.b * groups_, T(0));
  Tensor<T> y(x.shape());
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t g = 0; g < groups_; ++g) {
      const int64_t offset = (b * channels_ + g * per_group) * chan_size;
      const T* xp = x.data() + offset;
      double mean = 0.0;
      for (int64_t i = 0; i < n; ++i) mean += xp[i];
      mean /= n;
      double var = 0.0;
      for (int64_t i = 0; i < n; ++i) var += (xp[i] - mean) * (xp[i] - mean);
      var /= n;
      const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
      inv_std_[b * groups_ + g] = inv;
      T* xh = normalized_.data() + offset;
      T* yp = y.data() + offset;
      for (int64_t c = 0; c < per_group; ++c) {
        const int64_t channel = g * per_group + c;
        const T gm = gamma_.value[channel], bt = beta_.value[channel];
        for (int64_t i = c * chan_size; i < (c + 1) * chan_size; ++i) {
          xh[i] = static_cast<T>((xp[i] - mean) * inv);
          yp[i] = gm * xh[i] + bt;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> GroupNorm<T>::Backward(const Tensor<T>& grad_out) {
  const Dims d = DimsOf(normalized_);
  const int64_t per_group = channels_ / groups_;
  const int64_t chan_size = d.l * d.plane();
  const int64_t n = per_group * chan_size;
  Tensor<T> gx(normalized_.shape());
  std::vector<T> gxhat(n);
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t g = 0; g < groups_; ++g) {
      const int64_t offset = (b * channels_ + g * per_group) * chan_size;
      const T* gy = grad_out.data() + offset;
      const T* xh = normalized_.data() + offset;
      double mean_g = 0.0, mean_gx = 0.0;
      for (int64_t c = 0; c < per_group; ++c) {
        const int64_t channel = g * per_group + c;
        T sum_g = 0, sum_gx = 0;
        for (int64_t i = c * chan_size; i < (c + 1) * chan_size; ++i) {
          sum_g += gy[i];
          sum_gx += gy[i] * xh[i];
          gxhat[i] = gy[i] * gamma_.value[channel];
          mean_g += gxhat[i];
          mean_gx += gxhat[i] * xh[i];
        }
        beta_.grad[channel] += sum_g;
        gamma_.grad[channel] += sum_gx;
      }
      mean_g /= n;
      mean_gx /= n;
      const T inv = inv_std_[b * groups_ + g];
      T* gxp = gx.data() + offset;
      for (int64_t i = 0; i < n; ++i) {
        gxp[i] = static_cast<T>(inv * (gxhat[i] - mean_g - xh[i] * mean_gx));
      }
    }
  }
  return gx;
}

// ------------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(int in_features, int out_features, std::mt19937_64& rng)
    : in_(in_features),
      out_(out_features),
      weight_("weight", {out_features, in_features}),
      bias_("bias", {out_features}) {
  InitUniform(&weight_.value, in_features, rng);
  InitUniform(&bias_.value, in_features, rng);
}

template <typename T>
Tensor<T> Linear<T>::Forward(const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(1) != in_) {
    Fail(ErrorKind::kShapeMismatch, "Linear expects [N, " + std::to_string(in_) +
                                        "], got " + ShapeToString(x.shape()));
  }
  input_ = x;
  const int64_t rows = x.dim(0);
  Tensor<T> y({rows, out_});
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t o = 0; o < out_; ++o) {
      T acc = bias_.value[o];
      for (int64_t i = 0; i < in_; ++i) acc += weight_.value[o * in_ + i] * x[r * in_ + i];
      y[r * out_ + o] = acc;
    }
  }
  return y;
}

template <typename T>
Tensor<T> Linear<T>::Backward(const Tensor<T>& grad_out) {
  const int64_t rows = input_.dim(0);
  Tensor<T> gx(input_.shape());
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t o = 0; o < out_; ++o) {
      const T g = grad_out[r * out_ + o];
      bias_.grad[o] += g;
      for (int64_t i = 0; i < in_; ++i) {
        weight_.grad[o * in_ + i] += g * input_[r * in_ + i];
        gx[r * in_ + i] += g * weight_.value[o * in_ + i];
      }
    }
  }
  return gx;
}

// --------------------------------------------------------------------- SiLU

template <typename T>
Tensor<T> SiLU<T>::Forward(const Tensor<T>& x) {
  input_ = x;
  Tensor<T> y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] * Sigmoid(x[i]);
  return y;
}

template <typename T>
Tensor<T> SiLU<T>::Backward(const Tensor<T>& grad_out) const {
  Tensor<T> gx(input_.shape());
  for (int64_t i = 0; i < input_.size(); ++i) {
    const T s = Sigmoid(input_[i]);
    gx[i] = grad_out[i] * (s + input_[i] * s * (T(1) - s));
  }
  return gx;
}

// ------------------------------------------------------ pooling and friends

template <typename T>
Tensor<T> AvgPool2(const Tensor<T>& x) {
  const Dims d = DimsOf(x);
  if (d.h % 2 || d.w % 2) {
    Fail(ErrorKind::kShapeMismatch, "AvgPool2 needs even spatial dims");
  }
  const int64_t ho = d.h / 2, wo = d.w / 2;
  Tensor<T> y({d.b, d.c, d.l, ho, wo});
  const int64_t planes = d.b * d.c * d.l;
  for (int64_t p = 0; p < planes; ++p) {
    const T* xp = x.data() + p * d.plane();
    T* yp = y.data() + p * ho * wo;
    for (int64_t yy = 0; yy < ho; ++yy) {
      for (int64_t xx = 0; xx < wo; ++xx) {
        const T* a = xp + 2 * yy * d.w + 2 * xx;
        yp[yy * wo + xx] = T(0.25) * (a[0] + a[1] + a[d.w] + a[d.w + 1]);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> AvgPool2Backward(const Tensor<T>& grad_out) {
  const Dims d = DimsOf(grad_out);
  const int64_t hi = d.h * 2, wi = d.w * 2;
  Tensor<T> gx({d.b, d.c, d.l, hi, wi});
  const int64_t planes = d.b * d.c * d.l;
  for (int64_t p = 0; p < planes; ++p) {
    const T* gp = grad_out.data() + p * d.plane();
    T* gxp = gx.data() + p * hi * wi;
    for (int64_t yy = 0; yy < hi; ++yy) {
      for (int64_t xx = 0; xx < wi; ++xx) {
        gxp[yy * wi + xx] = T(0.25) * gp[(yy / 2) * d.w + xx / 2];
      }
    }
  }
  return gx;
}

template <typename T>
Tensor<T> Upsample2(const Tensor<T>& x) {
  const Dims d = DimsOf(x);
  const int64_t ho = d.h * 2, wo = d.w * 2;
  Tensor<T> y({d.b, d.c, d.l, ho, wo});
  const int64_t planes = d.b * d.c * d.l;
  for (int64_t p = 0; p < planes; ++p) {
    const T* xp = x.data() + p * d.plane();
    T* yp = y.data() + p * ho * wo;
    for (int64_t yy = 0; yy < ho; ++yy) {
      for (int64_t xx = 0; xx < wo; ++xx) yp[yy * wo + xx] = xp[(yy / 2) * d.w + xx / 2];
    }
  }
  return y;
}

template <typename T>
Tensor<T> Upsample2Backward(const Tensor<T>& grad_out) {
  const Dims d = DimsOf(grad_out);
  const int64_t ho = d.h / 2, wo = d.w / 2;
  Tensor<T> gx({d.b, d.c, d.l, ho, wo});
  const int64_t planes = d.b * d.c * d.l;
  for (int64_t p = 0; p < planes; ++p) {
    const T* gp = grad_out.data() + p * d.plane();
    T* gxp = gx.data() + p * ho * wo;
    for (int64_t yy = 0; yy < d.h; ++yy) {
      for (int64_t xx = 0; xx < d.w; ++xx) gxp[(yy / 2) * wo + xx / 2] += gp[yy * d.w + xx];
    }
  }
  return gx;
}

template <typename T>
Tensor<T> ConcatChannels(const Tensor<T>& a, const Tensor<T>& b) {
  const Dims da = DimsOf(a), db = DimsOf(b);
  if (da.b != db.b || da.l != db.l || da.h != db.h || da.w != db.w) {
    Fail(ErrorKind::kShapeMismatch, "ConcatChannels: " + ShapeToString(a.shape()) +
                                        " vs " + ShapeToString(b.shape()));
  }
  Tensor<T> y({da.b, da.c + db.c, da.l, da.h, da.w});
  const int64_t sa = da.c * da.l * da.plane(), sb = db.c * db.l * db.plane();
  for (int64_t i = 0; i < da.b; ++i) {
    std::copy(a.data() + i * sa, a.data() + (i + 1) * sa, y.data() + i * (sa + sb));
    std::copy(b.data() + i * sb, b.data() + (i + 1) * sb, y.data() + i * (sa + sb) + sa);
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> SplitChannels(const Tensor<T>& x, int first_channels) {
  const Dims d = DimsOf(x);
  Tensor<T> a({d.b, first_channels, d.l, d.h, d.w});
  Tensor<T> b({d.b, d.c - first_channels, d.l, d.h, d.w});
  const int64_t sa = a.size() / d.b, sb = b.size() / d.b;
  for (int64_t i = 0; i < d.b; ++i) {
    const T* src = x.data() + i * (sa + sb);
    std::copy(src, src + sa, a.data() + i * sa);
    std::copy(src + sa, src + sa + sb, b.data() + i * sb);
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
void AddInPlace(Tensor<T>* acc, const Tensor<T>& x) {
  RequireSameShape(acc->shape(), x.shape(), "AddInPlace");
  T* a = acc->data();
  const T* b = x.data();
  for (int64_t i = 0; i < x.size(); ++i) a[i] += b[i];
}

template <typename T>
Tensor<T> TimestepEmbedding(const std::vector<int>& timesteps, int dim) {
  const int64_t batch = static_cast<int64_t>(timesteps.size());
  const int half = dim / 2;
  Tensor<T> out({batch, dim});
  for (int64_t b = 0; b < batch; ++b) {
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / std::max(half, 1));
      const double arg = timesteps[b] * freq;
      out[b * dim + i] = static_cast<T>(std::sin(arg));
      out[b * dim + half + i] = static_cast<T>(std::cos(arg));
    }
  }
  return out;
}

// ----------------------------------------------------------- CrossAttention

template <typename T>
CrossAttention<T>::CrossAttention(int channels, int cond_dim, int frames, int tokens,
                                  int groups, std::mt19937_64& rng)
    : channels_(channels),
      cond_dim_(cond_dim),
      frames_(frames),
      tokens_(tokens),
      norm_(channels, groups),
      wq_("wq", {channels, channels}),
      pos_q_("pos_q", {frames, channels}),
      wk_("wk", {channels, cond_dim}),
      bk_("bk", {channels}),
      pos_k_("pos_k", {tokens, channels}),
      wv_("wv", {channels, cond_dim}),
      bv_("bv", {channels}),
      wo_("wo", {channels, channels}),
      bo_("bo", {channels}) {
  InitUniform(&wq_.value, channels, rng);
  InitUniform(&pos_q_.value, channels, rng);
  InitUniform(&wk_.value, cond_dim, rng);
  InitUniform(&bk_.value, cond_dim, rng);
  InitUniform(&pos_k_.value, channels, rng);
  InitUniform(&wv_.value, cond_dim, rng);
  InitUniform(&bv_.value, cond_dim, rng);
  InitUniform(&wo_.value, channels, rng);
  InitUniform(&bo_.value, channels, rng);
}

template <typename T>
void CrossAttention<T>::Collect(const std::string& prefix, ParamRefs<T>* out) {
  norm_.Collect(prefix + "norm.", out);
  AppendParams<T>(prefix, out, {&wq_, &pos_q_, &wk_, &bk_, &pos_k_, &wv_, &bv_, &wo_, &bo_});
}

template <typename T>
Tensor<T> CrossAttention<T>::Forward(const Tensor<T>& x, const Tensor<T>& cond) {
  const Dims d = DimsOf(x);
  RequireChannels<T>(d, channels_, "CrossAttention");
  if (d.l != frames_ || cond.rank() != 3 || cond.dim(0) != d.b ||
      cond.dim(1) != tokens_ || cond.dim(2) != cond_dim_) {
    Fail(ErrorKind::kShapeMismatch,
         "CrossAttention: features " + ShapeToString(x.shape()) + " with cond " +
             ShapeToString(cond.shape()) + ", expected " + std::to_string(frames_) +
             " frames and [B, " + std::to_string(tokens_) + ", " +
             std::to_string(cond_dim_) + "] tokens");
  }
  const int64_t c = channels_, m_count = tokens_, dd = cond_dim_;
  const int64_t hw = d.plane(), n_pos = d.l * hw;
  normed_ = norm_.Forward(x);

  z_ = Tensor<T>(cond.shape());
  for (int64_t bm = 0; bm < d.b * m_count; ++bm) {
    const T* src = cond.data() + bm * dd;
    double mean = 0.0, var = 0.0;
    for (int64_t j = 0; j < dd; ++j) mean += src[j];
    mean /= dd;
    for (int64_t j = 0; j < dd; ++j) var += (src[j] - mean) * (src[j] - mean);
    var /= dd;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (int64_t j = 0; j < dd; ++j) z_[bm * dd + j] = static_cast<T>((src[j] - mean) * inv);
  }

  k_ = Tensor<T>({d.b, m_count, c});
  v_ = Tensor<T>({d.b, m_count, c});
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t m = 0; m < m_count; ++m) {
      const T* zr = z_.data() + (b * m_count + m) * dd;
      for (int64_t ch = 0; ch < c; ++ch) {
        T ak = bk_.value[ch] + pos_k_.value[m * c + ch];
        T av = bv_.value[ch];
        for (int64_t j = 0; j < dd; ++j) {
          ak += wk_.value[ch * dd + j] * zr[j];
          av += wv_.value[ch * dd + j] * zr[j];
        }
        k_[(b * m_count + m) * c + ch] = ak;
        v_[(b * m_count + m) * c + ch] = av;
      }
    }
  }

  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)));
  q_ = Tensor<T>({d.b, n_pos, c});
  attn_ = Tensor<T>({d.b, n_pos, m_count});
  o_ = Tensor<T>({d.b, n_pos, c});
  Tensor<T> y = x;
  std::vector<T> feat(c), logits(m_count);
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t n = 0; n < n_pos; ++n) {
      const int64_t l = n / hw, p = n % hw;
      for (int64_t ch = 0; ch < c; ++ch) {
        feat[ch] = normed_[((b * c + ch) * d.l + l) * hw + p];
      }
      T* qr = q_.data() + (b * n_pos + n) * c;
      for (int64_t ch = 0; ch < c; ++ch) {
        T acc = pos_q_.value[l * c + ch];
        for (int64_t j = 0; j < c; ++j) acc += wq_.value[ch * c + j] * feat[j];
        qr[ch] = acc;
      }
      T max_logit = -std::numeric_limits<T>::infinity();
      for (int64_t m = 0; m < m_count; ++m) {
        const T* kr = k_.data() + (b * m_count + m) * c;
        T s = 0;
        for (int64_t ch = 0; ch < c; ++ch) s += qr[ch] * kr[ch];
        logits[m] = s * scale;
        max_logit = std::max(max_logit, logits[m]);
      }
      T denom = 0;
      T* ar = attn_.data() + (b * n_pos + n) * m_count;
      for (int64_t m = 0; m < m_count; ++m) {
        ar[m] = std::exp(logits[m] - max_logit);
        denom += ar[m];
      }
      for (int64_t m = 0; m < m_count; ++m) ar[m] /= denom;
      T* orow = o_.data() + (b * n_pos + n) * c;
      for (int64_t m = 0; m < m_count; ++m) {
        const T* vr = v_.data() + (b * m_count + m) * c;
        for (int64_t ch = 0; ch < c; ++ch) orow[ch] += ar[m] * vr[ch];
      }
      for (int64_t ch = 0; ch < c; ++ch) {
        T acc = bo_.value[ch];
        for (int64_t j = 0; j < c; ++j) acc += wo_.value[ch * c + j] * orow[j];
        y[((b * c + ch) * d.l + l) * hw + p] += acc;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> CrossAttention<T>::Backward(const Tensor<T>& grad_out) {
  const Dims d = DimsOf(normed_);
  const int64_t c = channels_, m_count = tokens_, dd = cond_dim_;
  const int64_t hw = d.plane(), n_pos = d.l * hw;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)));
  Tensor<T> g_normed(normed_.shape());
  Tensor<T> gk({d.b, m_count, c}), gv({d.b, m_count, c});
  std::vector<T> gy(c), go(c), ga(m_count), gs(m_count), gq(c);
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t n = 0; n < n_pos; ++n) {
      const int64_t l = n / hw, p = n % hw;
      for (int64_t ch = 0; ch < c; ++ch) gy[ch] = grad_out[((b * c + ch) * d.l + l) * hw + p];
      const T* orow = o_.data() + (b * n_pos + n) * c;
      std::fill(go.begin(), go.end(), T(0));
      for (int64_t ch = 0; ch < c; ++ch) {
        bo_.grad[ch] += gy[ch];
        for (int64_t j = 0; j < c; ++j) {
          wo_.grad[ch * c + j] += gy[ch] * orow[j];
          go[j] += wo_.value[ch * c + j] * gy[ch];
        }
      }
      const T* ar = attn_.data() + (b * n_pos + n) * m_count;
      T dot = 0;
      for (int64_t m = 0; m < m_count; ++m) {
        const T* vr = v_.data() + (b * m_count + m) * c;
        T* gvr = gv.data() + (b * m_count + m) * c;
        T s = 0;
        for (int64_t ch = 0; ch < c; ++ch) {
          s += go[ch] * vr[ch];
          gvr[ch] += ar[m] * go[ch];
        }
        ga[m] = s;
        dot += ar[m] * s;
      }
      for (int64_t m = 0; m < m_count; ++m) gs[m] = ar[m] * (ga[m] - dot) * scale;
      const T* qr = q_.data() + (b * n_pos + n) * c;
      std::fill(gq.begin(), gq.end(), T(0));
      for (int64_t m = 0; m < m_count; ++m) {
        const T* kr = k_.data() + (b * m_count + m) * c;
        T* gkr = gk.data() + (b * m_count + m) * c;
        for (int64_t ch = 0; ch < c; ++ch) {
          gq[ch] += gs[m] * kr[ch];
          gkr[ch] += gs[m] * qr[ch];
        }
      }
      for (int64_t ch = 0; ch < c; ++ch) {
        pos_q_.grad[l * c + ch] += gq[ch];
        for (int64_t j = 0; j < c; ++j) {
          const int64_t idx = ((b * c + j) * d.l + l) * hw + p;
          wq_.grad[ch * c + j] += gq[ch] * normed_[idx];
          g_normed[idx] += wq_.value[ch * c + j] * gq[ch];
        }
      }
    }
  }
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t m = 0; m < m_count; ++m) {
      const T* zr = z_.data() + (b * m_count + m) * dd;
      for (int64_t ch = 0; ch < c; ++ch) {
        const T gkv = gk[(b * m_count + m) * c + ch];
        const T gvv = gv[(b * m_count + m) * c + ch];
        bk_.grad[ch] += gkv;
        pos_k_.grad[m * c + ch] += gkv;
        bv_.grad[ch] += gvv;
        for (int64_t j = 0; j < dd; ++j) {
          wk_.grad[ch * dd + j] += gkv * zr[j];
          wv_.grad[ch * dd + j] += gvv * zr[j];
        }
      }
    }
  }
  Tensor<T> gx = norm_.Backward(g_normed);
  AddInPlace(&gx, grad_out);
  return gx;
}

// ---------------------------------------------------------------- ResBlock

template <typename T>
ResBlock<T>::ResBlock(int in_channels, int out_channels, int temb_dim, int groups,
                      std::mt19937_64& rng)
    : cin_(in_channels),
      cout_(out_channels),
      norm1_(in_channels, std::gcd(in_channels, groups)),
      norm2_(out_channels, std::gcd(out_channels, groups)),
      spatial1_(in_channels, out_channels, rng),
      spatial2_(out_channels, out_channels, rng),
      temporal1_(out_channels, out_channels, rng),
      temporal2_(out_channels, out_channels, rng),
      temb_proj_(temb_dim, out_channels, rng),
      has_skip_(in_channels != out_channels) {
  if (has_skip_) skip_ = Conv1x1<T>(in_channels, out_channels, rng);
}

template <typename T>
void ResBlock<T>::Collect(const std::string& prefix, ParamRefs<T>* out) {
  norm1_.Collect(prefix + "norm1.", out);
  spatial1_.Collect(prefix + "spatial1.", out);
  temporal1_.Collect(prefix + "temporal1.", out);
  temb_proj_.Collect(prefix + "temb_proj.", out);
  norm2_.Collect(prefix + "norm2.", out);
  spatial2_.Collect(prefix + "spatial2.", out);
  temporal2_.Collect(prefix + "temporal2.", out);
  if (has_skip_) skip_.Collect(prefix + "skip.", out);
}

template <typename T>
Tensor<T> ResBlock<T>::Forward(const Tensor<T>& x, const Tensor<T>& temb_act) {
  const Dims d = DimsOf(x);
  Tensor<T> h = temporal1_.Forward(spatial1_.Forward(act1_.Forward(norm1_.Forward(x))));
  const Tensor<T> t = temb_proj_.Forward(temb_act);  // [B, Cout]
  const int64_t chan_size = d.l * d.plane();
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t c = 0; c < cout_; ++c) {
      T* hp = h.data() + (b * cout_ + c) * chan_size;
      const T add = t[b * cout_ + c];
      for (int64_t i = 0; i < chan_size; ++i) hp[i] += add;
    }
  }
  h = temporal2_.Forward(spatial2_.Forward(act2_.Forward(norm2_.Forward(h))));
  if (has_skip_) {
    AddInPlace(&h, skip_.Forward(x));
  } else {
    AddInPlace(&h, x);
  }
  return h;
}

template <typename T>
Tensor<T> ResBlock<T>::Backward(const Tensor<T>& grad_out, Tensor<T>* grad_temb_act) {
  Tensor<T> gx = has_skip_ ? skip_.Backward(grad_out) : grad_out;
  Tensor<T> g = norm2_.Backward(act2_.Backward(spatial2_.Backward(temporal2_.Backward(grad_out))));
  const Dims d = DimsOf(g);
  const int64_t chan_size = d.l * d.plane();
  Tensor<T> gt({d.b, cout_});
  for (int64_t b = 0; b < d.b; ++b) {
    for (int64_t c = 0; c < cout_; ++c) {
      const T* gp = g.data() + (b * cout_ + c) * chan_size;
      T s = 0;
      for (int64_t i = 0; i < chan_size; ++i) s += gp[i];
      gt[b * cout_ + c] = s;
    }
  }
  AddInPlace(grad_temb_act, temb_proj_.Backward(gt));
  AddInPlace(&gx, norm1_.Backward(act1_.Backward(spatial1_.Backward(temporal1_.Backward(g)))));
  return gx;
}

#define TRACTDIFF_INSTANTIATE_NN(T)                                            \
  template void InitUniform<T>(Tensor<T>*, int64_t, std::mt19937_64&);        \
  template class Conv2d3x3<T>;                                                 \
  template class TemporalConv3<T>;                                             \
  template class Conv1x1<T>;                                                   \
  template class GroupNorm<T>;                                                 \
  template class Linear<T>;                                                    \
  template class SiLU<T>;                                                      \
  template class CrossAttention<T>;                                            \
  template class ResBlock<T>;                                                  \
  template Tensor<T> AvgPool2<T>(const Tensor<T>&);                            \
  template Tensor<T> AvgPool2Backward<T>(const Tensor<T>&);                    \
  template Tensor<T> Upsample2<T>(const Tensor<T>&);                           \
  template Tensor<T> Upsample2Backward<T>(const Tensor<T>&);                   \
  template Tensor<T> ConcatChannels<T>(const Tensor<T>&, const Tensor<T>&);    \
  template std::pair<Tensor<T>, Tensor<T>> SplitChannels<T>(const Tensor<T>&, int); \
  template void AddInPlace<T>(Tensor<T>*, const Tensor<T>&);                   \
  template Tensor<T> TimestepEmbedding<T>(const std::vector<int>&, int);

TRACTDIFF_INSTANTIATE_NN(float)
TRACTDIFF_INSTANTIATE_NN(double)

}  // namespace tractdiff::nn
