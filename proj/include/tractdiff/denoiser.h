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

#include <vector>

#include "tractdiff/nn_layers.h"
#include "tractdiff/tensor.h"

namespace tractdiff {

// Noise predictor eps(x_t, t, cond, init_frame).
//   x_t:        [B, L, H, W, 1] in model range
//   timesteps:  [B], 1-based training-schedule steps
//   cond:       [B, M, D] speech tokens (M = L, or 1 when pooled)
//   init_frame: [B, H, W, 1] in model range
// Returns a tensor shaped like x_t. Not const: implementations may cache
// activations for a following backward pass.
template <typename T>
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual int clip_length() const = 0;
  virtual Tensor<T> Predict(const Tensor<T>& x_t, const std::vector<int>& timesteps,
                            const Tensor<T>& cond, const Tensor<T>& init_frame) = 0;
};

template <typename T>
class TrainableDenoiser : public Denoiser<T> {
 public:
  // Accumulates parameter gradients for the last Predict call.
  virtual void Backward(const Tensor<T>& grad_eps) = 0;
  virtual nn::ParamRefs<T> Params() = 0;

  void ZeroGrad() {
    for (auto& [name, p] : Params()) p->grad.Fill(T(0));
  }
};

}  // namespace tractdiff
