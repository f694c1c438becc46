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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "tractdiff/denoiser.h"
#include "tractdiff/schedule.h"
#include "tractdiff/speech_encoding.h"
#include "tractdiff/tensor.h"

namespace tractdiff {

inline constexpr double kDefaultCfgScale = 2.0;

// eps_u + w (eps_c - eps_u); w = 1 and w = 0 return the inputs unchanged.
template <typename T>
Tensor<T> CfgCombine(const Tensor<T>& eps_cond, const Tensor<T>& eps_uncond, double w);

// One ancestral DDPM step from x_t to x_{t-1}:
//   mu = (x_t - beta_t / sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_t)
//   x_{t-1} = mu + sigma_t z for t > 1, sigma_t^2 the posterior variance.
// `noise` is ignored at t = 1 and required otherwise. With `clip_x0` the
// implied x0 is clamped to [-1, 1] and the posterior mean is formed from it.
template <typename T>
Tensor<T> ReverseStep(const Tensor<T>& x_t, const Tensor<T>& eps, int t,
                      const NoiseSchedule& sched, const Tensor<T>* noise,
                      bool clip_x0 = false);

struct SampleOptions {
  double cfg_scale = kDefaultCfgScale;
  int n_steps = 50;        // <= training steps; strided subsequence if smaller
  bool clip_x0 = true;     // clamp the predicted x0 at every step
  bool reimpose_init = false;  // pin the first frame to the (noised) init frame
};

// Generates one clip [L, H, W, 1] in [0, 1]. `cond` is [M, D]; `init_frame`
// is [H, W, 1] in [0, 1]. Noise is drawn from `rng` in a fixed order: x_T
// first, then one tensor per step with t > 1.
TensorF SampleClip(Denoiser<float>& model, const TensorF& cond, const TensorF& init_frame,
                   const NoiseSchedule& sched, const SampleOptions& options,
                   std::mt19937_64& rng);

struct GenerationRequest {
  Waveform waveform;
  TensorF init_frame;  // [H, W, 1] in [0, 1]
  double cfg_scale = kDefaultCfgScale;
  int n_sample_steps = 50;
  uint64_t seed = 0;
  std::string encoder_id = "mock";
  bool pooled = false;
  bool reimpose_init = false;

  // Everything except the waveform and frame payloads, plus their digests.
  nlohmann::json Echo() const;
};

struct GeneratedVideo {
  TensorF frames;  // [N, H, W, 1] in [0, 1]
  std::vector<int64_t> clip_boundaries;
  nlohmann::json request_echo;
};

// Regressive long-form generation: the waveform is encoded once, each clip
// is conditioned on its slice of the embedding sequence and on the last
// frame of the previous clip. The final partial clip is generated in full
// and truncated to floor(duration * 50) frames in total.
GeneratedVideo SampleLong(Denoiser<float>& model, const NoiseSchedule& sched,
                          const GenerationRequest& request, const EncoderPlugin& plugin);

}  // namespace tractdiff
