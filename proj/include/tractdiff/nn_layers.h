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

#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tractdiff/tensor.h"

// Minimal layers with explicit forward/backward passes. Feature maps are
// [B, C, L, H, W] (batch, channels, frames, height, width). Every layer keeps
// what it needs from its last Forward call, so each instance may appear only
// once in a graph and Backward must follow the matching Forward.
namespace tractdiff::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Shape shape)
      : name(std::move(n)), value(shape), grad(shape) {}
};

template <typename T>
using ParamRefs = std::vector<std::pair<std::string, Param<T>*>>;

template <typename T>
void AppendParams(const std::string& prefix, ParamRefs<T>* out,
                  std::initializer_list<Param<T>*> params) {
  for (Param<T>* p : params) out->emplace_back(prefix + p->name, p);
}

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void InitUniform(Tensor<T>* t, int64_t fan_in, std::mt19937_64& rng);

template <typename T>
class Conv2d3x3 {
 public:
  Conv2d3x3() = default;
  Conv2d3x3(int in_channels, int out_channels, std::mt19937_64& rng);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& grad_out);
  void Collect(const std::string& prefix, ParamRefs<T>* out) {
    AppendParams<T>(prefix, out, {&weight_, &bias_});
  }

 private:
  int cin_ = 0, cout_ = 0;
  Param<T> weight_, bias_;  // [Cout, Cin, 3, 3], [Cout]
  Tensor<T> input_;
};

// Kernel-3 convolution along the frame axis, applied at every pixel.
template <typename T>
class TemporalConv3 {
 public:
  TemporalConv3() = default;
  TemporalConv3(int in_channels, int out_channels, std::mt19937_64& rng);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& grad_out);
  void Collect(const std::string& prefix, ParamRefs<T>* out) {
    AppendParams<T>(prefix, out, {&weight_, &bias_});
  }

 private:
  int cin_ = 0, cout_ = 0;
  Param<T> weight_, bias_;  // [Cout, Cin, 3], [Cout]
  Tensor<T> input_;
};

template <typename T>
class Conv1x1 {
 public:
  Conv1x1() = default;
  Conv1x1(int in_channels, int out_channels, std::mt19937_64& rng);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& grad_out);
  void Collect(const std::string& prefix, ParamRefs<T>* out) {
    AppendParams<T>(prefix, out, {&weight_, &bias_});
  }

 private:
  int cin_ = 0, cout_ = 0;
  Param<T> weight_, bias_;  // [Cout, Cin], [Cout]
  Tensor<T> input_;
};

template <typename T>
class GroupNorm {
 public:
  GroupNorm() = default;
  GroupNorm(int channels, int groups);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& grad_out);
  void Collect(const std::string& prefix, ParamRefs<T>* out) {
    AppendParams<T>(prefix, out, {&gamma_, &beta_});
  }

 private:
  int channels_ = 0, groups_ = 1;
  Param<T> gamma_, beta_;
  Tensor<T> normalized_;
  std::vector<T> inv_std_;  // [B * groups]
};

// Fully connected layer on [N, in] rows.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(int in_features, int out_features, std::mt19937_64& rng);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& grad_out);
  void Collect(const std::string& prefix, ParamRefs<T>* out) {
    AppendParams<T>(prefix, out, {&weight_, &bias_});
  }

 private:
  int in_ = 0, out_ = 0;
  Param<T> weight_, bias_;  // [out, in], [out]
  Tensor<T> input_;
};

template <typename T>
class SiLU {
 public:
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& grad_out) const;

 private:
  Tensor<T> input_;
};

// 2x2 spatial average pooling; H and W must be even.
template <typename T>
Tensor<T> AvgPool2(const Tensor<T>& x);
template <typename T>
Tensor<T> AvgPool2Backward(const Tensor<T>& grad_out);

// 2x nearest-neighbour spatial upsampling.
template <typename T>
Tensor<T> Upsample2(const Tensor<T>& x);
template <typename T>
Tensor<T> Upsample2Backward(const Tensor<T>& grad_out);

template <typename T>
Tensor<T> ConcatChannels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
std::pair<Tensor<T>, Tensor<T>> SplitChannels(const Tensor<T>& x, int first_channels);

template <typename T>
void AddInPlace(Tensor<T>* acc, const Tensor<T>& x);

// Sinusoidal embedding of integer timesteps -> [B, dim].
template <typename T>
Tensor<T> TimestepEmbedding(const std::vector<int>& timesteps, int dim);

// Single-head cross-attention from every (frame, pixel) position to a small
// set of conditioning tokens, added residually:
//   y = x + Wo * softmax(q k^T / sqrt(C)) v
// with q = Wq GN(x) + pos_q[frame], k = Wk z + bk + pos_k[token],
// v = Wv z + bv and z the per-token standardized conditioning vectors.
// The conditioning input is data, so no gradient flows into it.
template <typename T>
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(int channels, int cond_dim, int frames, int tokens, int groups,
                 std::mt19937_64& rng);
  Tensor<T> Forward(const Tensor<T>& x, const Tensor<T>& cond);
  Tensor<T> Backward(const Tensor<T>& grad_out);
  void Collect(const std::string& prefix, ParamRefs<T>* out);

 private:
  int channels_ = 0, cond_dim_ = 0, frames_ = 0, tokens_ = 0;
  GroupNorm<T> norm_;
  Param<T> wq_, pos_q_, wk_, bk_, pos_k_, wv_, bv_, wo_, bo_;
  // Caches from Forward.
  Tensor<T> normed_;  // GN(x), [B, C, L, H, W]
  Tensor<T> z_;       // [B, M, D]
  Tensor<T> q_;       // [B, N, C], N = L * H * W
  Tensor<T> k_, v_;   // [B, M, C]
  Tensor<T> attn_;    // [B, N, M]
  Tensor<T> o_;       // [B, N, C]
};

// Residual block with factorized spatiotemporal convolutions:
//   h = TConv(SConv(SiLU(GN(x)))) + Proj(temb)
//   h = TConv(SConv(SiLU(GN(h))))
//   y = skip(x) + h
template <typename T>
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(int in_channels, int out_channels, int temb_dim, int groups,
           std::mt19937_64& rng);
  // `temb_act` is SiLU(time embedding), [B, temb_dim].
  Tensor<T> Forward(const Tensor<T>& x, const Tensor<T>& temb_act);
  // Returns the input gradient; adds into *grad_temb_act.
  Tensor<T> Backward(const Tensor<T>& grad_out, Tensor<T>* grad_temb_act);
  void Collect(const std::string& prefix, ParamRefs<T>* out);

 private:
  int cin_ = 0, cout_ = 0;
  GroupNorm<T> norm1_, norm2_;
  SiLU<T> act1_, act2_;
  Conv2d3x3<T> spatial1_, spatial2_;
  TemporalConv3<T> temporal1_, temporal2_;
  Linear<T> temb_proj_;
  bool has_skip_ = false;
  Conv1x1<T> skip_;
};

}  // namespace tractdiff::nn
