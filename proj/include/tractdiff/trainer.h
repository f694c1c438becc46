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
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "tractdiff/corpus.h"
#include "tractdiff/schedule.h"
#include "tractdiff/unet.h"

namespace tractdiff {

struct TrainConfig {
  DenoiserConfig model;
  int diffusion_steps = 1000;
  ScheduleKind schedule = ScheduleKind::kCosine;
  double p_dropout = 0.1;
  double learning_rate = 1e-3;
  int warmup_steps = 0;
  int train_steps = 2000;
  int batch_size = 2;
  double grad_clip = 1.0;
  uint64_t seed = 0;
  int checkpoint_every = 500;
  std::string encoder = "mock";
  int mock_dim = 64;

  nlohmann::json ToJson() const;
  // Missing keys keep their current values; "model" is merged key by key.
  void UpdateFromJson(const nlohmann::json& j);
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::vector<TensorF> m;
  std::vector<TensorF> v;
};

// Owns the model, optimizer and RNG of one training run. Step() is not
// thread-safe.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& config);

  // One optimizer step on a random batch drawn from `data`. Returns the loss.
  float Step(const std::vector<TrainingExample>& data);
  // Runs until step() == config().train_steps. `on_step(step, loss)` is
  // called after every step.
  void Train(const std::vector<TrainingExample>& data,
             const std::function<void(int64_t, float)>& on_step = {});

  const TrainConfig& config() const { return config_; }
  TrainConfig& mutable_config() { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  UNet3D<float>& model() { return *model_; }
  AdamState& adam() { return adam_; }
  std::mt19937_64& rng() { return rng_; }
  int64_t step() const { return step_; }
  void set_step(int64_t step) { step_ = step; }
  // Mean init frame of the training data; the sampling fallback when no
  // init frame is supplied. [H, W, 1] in [0, 1].
  const TensorF& rest_frame() const { return rest_frame_; }
  void set_rest_frame(TensorF frame) { rest_frame_ = std::move(frame); }
  static TensorF MeanInitFrame(const std::vector<TrainingExample>& data);

 private:
  TrainConfig config_;
  NoiseSchedule schedule_;
  std::unique_ptr<UNet3D<float>> model_;
  AdamState adam_;
  std::mt19937_64 rng_;
  int64_t step_ = 0;
  TensorF rest_frame_;
};

// Global L2 norm of all gradients; rescales them to at most `max_norm`.
double ClipGradNorm(nn::ParamRefs<float>& params, double max_norm);

void AdamUpdate(nn::ParamRefs<float>& params, AdamState* state, double lr);

}  // namespace tractdiff
