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
#include <memory>
#include <vector>

#include "json.hpp"
#include "tractdiff/denoiser.h"
#include "tractdiff/nn_layers.h"

namespace tractdiff {

struct DenoiserConfig {
  int resolution = 64;
  int clip_length = 10;
  int base_channels = 32;
  std::vector<int> channel_multipliers = {1, 2, 4};
  std::vector<int> attention_resolutions = {32, 16};
  int cond_dim = 64;
  bool pooled = false;
  int norm_groups = 8;

  int tokens() const { return pooled ? 1 : clip_length; }
  int temb_dim() const { return 4 * base_channels; }

  nlohmann::json ToJson() const;
  // Missing keys keep their current values.
  void UpdateFromJson(const nlohmann::json& j);
  // Throws BadArgument on inconsistent settings.
  void Validate() const;
  bool operator==(const DenoiserConfig&) const = default;
};

// Multipliers (1, 2) up to 16 px, (1, 2, 4) above; attention at the two
// coarsest resolutions.
DenoiserConfig DefaultDenoiserConfig(int resolution, int cond_dim, int clip_length = 10,
                                     bool pooled = false);

// 3-D U-Net: [x_t | init_frame] -> conv -> ResBlock(+attention) per level
// with 2x2 pooling, a middle block, and a mirrored up path with skip
// concatenation and nearest upsampling.
template <typename T>
class UNet3D : public TrainableDenoiser<T> {
 public:
  UNet3D(const DenoiserConfig& config, uint64_t seed);

  const DenoiserConfig& config() const { return config_; }
  int clip_length() const override { return config_.clip_length; }

  Tensor<T> Predict(const Tensor<T>& x_t, const std::vector<int>& timesteps,
                    const Tensor<T>& cond, const Tensor<T>& init_frame) override;
  void Backward(const Tensor<T>& grad_eps) override;
  nn::ParamRefs<T> Params() override;
  int64_t NumParameters();

 private:
  struct Level {
    int resolution = 0;
    int channels = 0;
    std::unique_ptr<nn::ResBlock<T>> down;
    std::unique_ptr<nn::CrossAttention<T>> down_attn;
    std::unique_ptr<nn::ResBlock<T>> up;
    std::unique_ptr<nn::CrossAttention<T>> up_attn;
    int up_input_channels = 0;  // channels arriving from below before concat
  };

  DenoiserConfig config_;
  nn::Linear<T> temb1_, temb2_;
  nn::SiLU<T> temb_act1_, temb_act2_;
  nn::Conv2d3x3<T> conv_in_;
  std::vector<Level> levels_;
  std::unique_ptr<nn::ResBlock<T>> mid_;
  std::unique_ptr<nn::CrossAttention<T>> mid_attn_;
  nn::GroupNorm<T> out_norm_;
  nn::SiLU<T> out_act_;
  nn::Conv2d3x3<T> conv_out_;
  int64_t batch_ = 0;
};

}  // namespace tractdiff
