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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tractdiff/corpus.h"
#include "tractdiff/denoiser.h"
#include "tractdiff/schedule.h"
#include "tractdiff/tensor.h"

namespace tractdiff {

inline constexpr double kDefaultCfgDropout = 0.1;

// Pixel intensities live in [0, 1]; the diffusion model works in [-1, 1].
template <typename T>
Tensor<T> ToModelRange(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] * T(2) - T(1);
  return y;
}

template <typename T>
Tensor<T> FromModelRange(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    y[i] = (std::clamp(x[i], T(-1), T(1)) + T(1)) * T(0.5);
  }
  return y;
}

template <typename T>
Tensor<T> StandardNormal(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<T> out(shape);
  for (T& v : out.values()) v = static_cast<T>(normal(rng));
  return out;
}

// x_t = sqrt(alpha_bar) x0 + sqrt(1 - alpha_bar) noise.
template <typename T>
Tensor<T> QSampleAt(const Tensor<T>& x0, double alpha_bar, const Tensor<T>& noise) {
  RequireSameShape(x0.shape(), noise.shape(), "q_sample");
  const T a = static_cast<T>(std::sqrt(alpha_bar));
  const T s = static_cast<T>(std::sqrt(1.0 - alpha_bar));
  Tensor<T> out(x0.shape());
  for (int64_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + s * noise[i];
  return out;
}

template <typename T>
Tensor<T> QSample(const Tensor<T>& x0, int t, const Tensor<T>& noise,
                  const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps) {
    Fail(ErrorKind::kOutOfRange, "timestep " + std::to_string(t) + " outside [1, " +
                                     std::to_string(sched.steps) + "]");
  }
  return QSampleAt(x0, sched.alpha_bar(t), noise);
}

// Per-element timesteps along the leading (batch) axis.
template <typename T>
Tensor<T> QSampleBatch(const Tensor<T>& x0, const std::vector<int>& timesteps,
                       const Tensor<T>& noise, const NoiseSchedule& sched) {
  RequireSameShape(x0.shape(), noise.shape(), "q_sample");
  const int64_t b = x0.dim(0);
  if (static_cast<int64_t>(timesteps.size()) != b) {
    Fail(ErrorKind::kShapeMismatch, "expected one timestep per batch element");
  }
  Tensor<T> out(x0.shape());
  const int64_t n = x0.size() / b;
  for (int64_t i = 0; i < b; ++i) {
    const double ab = sched.alpha_bar(timesteps[i]);
    const T a = static_cast<T>(std::sqrt(ab)), s = static_cast<T>(std::sqrt(1.0 - ab));
    for (int64_t j = i * n; j < (i + 1) * n; ++j) out[j] = a * x0[j] + s * noise[j];
  }
  return out;
}

// Replaces each batch element of `cond` ([B, M, D]) by the null token (all
// zeros) with probability p. Returns the mask of replaced elements.
template <typename T>
std::vector<bool> ApplyCfgDropout(Tensor<T>* cond, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    Fail(ErrorKind::kBadArgument, "dropout probability must lie in [0, 1]");
  }
  const int64_t b = cond->dim(0);
  std::vector<bool> is_null(b, false);
  std::bernoulli_distribution coin(p);
  for (int64_t i = 0; i < b; ++i) {
    if (coin(rng)) {
      is_null[i] = true;
      for (T& v : cond->Slab0(i)) v = T(0);
    }
  }
  return is_null;
}

template <typename T>
struct DiffusionBatch {
  Tensor<T> x0;          // [B, L, H, W, 1] in [-1, 1]
  Tensor<T> cond;        // [B, M, D]
  Tensor<T> init_frame;  // [B, H, W, 1] in [-1, 1]
  std::vector<bool> is_null;
};

// Randomness of one loss evaluation: t ~ U{1..T}, noise ~ N(0, I).
template <typename T>
struct LossDraw {
  std::vector<int> timesteps;
  Tensor<T> noise;
};

template <typename T>
LossDraw<T> DrawLossNoise(const Shape& x0_shape, const NoiseSchedule& sched,
                          std::mt19937_64& rng) {
  LossDraw<T> draw;
  std::uniform_int_distribution<int> step(1, sched.steps);
  for (int64_t i = 0; i < x0_shape[0]; ++i) draw.timesteps.push_back(step(rng));
  draw.noise = StandardNormal<T>(x0_shape, rng);
  return draw;
}

// Mean squared error between the injected noise and the prediction.
template <typename T>
T TrainingLossWith(Denoiser<T>& model, const DiffusionBatch<T>& batch,
                   const NoiseSchedule& sched, const LossDraw<T>& draw) {
  const Tensor<T> x_t = QSampleBatch(batch.x0, draw.timesteps, draw.noise, sched);
  const Tensor<T> eps = model.Predict(x_t, draw.timesteps, batch.cond, batch.init_frame);
  RequireSameShape(eps.shape(), draw.noise.shape(), "denoiser output");
  double acc = 0.0;
  for (int64_t i = 0; i < eps.size(); ++i) {
    const double d = static_cast<double>(eps[i]) - draw.noise[i];
    acc += d * d;
  }
  return static_cast<T>(acc / eps.size());
}

template <typename T>
T TrainingLoss(Denoiser<T>& model, const DiffusionBatch<T>& batch,
               const NoiseSchedule& sched, std::mt19937_64& rng) {
  return TrainingLossWith(model, batch, sched, DrawLossNoise<T>(batch.x0.shape(), sched, rng));
}

// Loss plus accumulated parameter gradients.
template <typename T>
T TrainingLossAndGrad(TrainableDenoiser<T>& model, const DiffusionBatch<T>& batch,
                      const NoiseSchedule& sched, const LossDraw<T>& draw) {
  const Tensor<T> x_t = QSampleBatch(batch.x0, draw.timesteps, draw.noise, sched);
  const Tensor<T> eps = model.Predict(x_t, draw.timesteps, batch.cond, batch.init_frame);
  Tensor<T> grad(eps.shape());
  double acc = 0.0;
  const T scale = T(2) / static_cast<T>(eps.size());
  for (int64_t i = 0; i < eps.size(); ++i) {
    const T d = eps[i] - draw.noise[i];
    acc += static_cast<double>(d) * d;
    grad[i] = scale * d;
  }
  model.Backward(grad);
  return static_cast<T>(acc / eps.size());
}

// Stacks examples into a model-range batch. Pooled conditioning averages
// each clip's embeddings into one token. CFG dropout with probability
// `p_dropout` is applied last.
DiffusionBatch<float> MakeBatch(const std::vector<const TrainingExample*>& examples,
                                bool pooled, double p_dropout, std::mt19937_64& rng);

// Conditioning tokens of one example: [L, D], or [1, D] when pooled.
TensorF ConditioningTokens(const TensorF& embeddings, bool pooled);

}  // namespace tractdiff
