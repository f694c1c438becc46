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

#include "tractdiff/unet.h"

#include <algorithm>
#include <numeric>

namespace tractdiff {

using nlohmann::json;

json DenoiserConfig::ToJson() const {
  return json{{"resolution", resolution},
              {"clip_length", clip_length},
              {"base_channels", base_channels},
              {"channel_multipliers", channel_multipliers},
              {"attention_resolutions", attention_resolutions},
              {"cond_dim", cond_dim},
              {"pooled", pooled},
              {"norm_groups", norm_groups}};
}

void DenoiserConfig::UpdateFromJson(const json& j) {
  if (!j.is_object()) Fail(ErrorKind::kBadArgument, "model config must be an object");
  resolution = j.value("resolution", resolution);
  clip_length = j.value("clip_length", clip_length);
  base_channels = j.value("base_channels", base_channels);
  channel_multipliers = j.value("channel_multipliers", channel_multipliers);
  attention_resolutions = j.value("attention_resolutions", attention_resolutions);
  cond_dim = j.value("cond_dim", cond_dim);
  pooled = j.value("pooled", pooled);
  norm_groups = j.value("norm_groups", norm_groups);
}

void DenoiserConfig::Validate() const {
  auto bad = [](const std::string& msg) { Fail(ErrorKind::kBadArgument, msg); };
  if (clip_length < 1) bad("clip_length must be >= 1");
  if (base_channels < 1) bad("base_channels must be >= 1");
  if (cond_dim < 1) bad("cond_dim must be >= 1");
  if (norm_groups < 1) bad("norm_groups must be >= 1");
  if (channel_multipliers.empty()) bad("channel_multipliers is empty");
  for (int m : channel_multipliers) {
    if (m < 1) bad("channel multipliers must be positive");
  }
  const int levels = static_cast<int>(channel_multipliers.size());
  if (resolution < 1 || resolution % (1 << (levels - 1)) != 0) {
    bad("resolution " + std::to_string(resolution) + " is not divisible by 2^" +
        std::to_string(levels - 1));
  }
}

DenoiserConfig DefaultDenoiserConfig(int resolution, int cond_dim, int clip_length,
                                     bool pooled) {
  DenoiserConfig c;
  c.resolution = resolution;
  c.cond_dim = cond_dim;
  c.clip_length = clip_length;
  c.pooled = pooled;
  if (resolution <= 16) {
    c.channel_multipliers = {1, 2};
  } else {
    c.channel_multipliers = {1, 2, 4};
  }
  const int coarsest = resolution >> (c.channel_multipliers.size() - 1);
  c.attention_resolutions = {coarsest * 2, coarsest};
  return c;
}

template <typename T>
UNet3D<T>::UNet3D(const DenoiserConfig& config, uint64_t seed) : config_(config) {
  config_.Validate();
  std::mt19937_64 rng(seed);
  const int base = config_.base_channels;
  const int temb = config_.temb_dim();
  const int groups = config_.norm_groups;
  auto has_attn = [&](int res) {
    return std::find(config_.attention_resolutions.begin(),
                     config_.attention_resolutions.end(),
                     res) != config_.attention_resolutions.end();
  };
  auto make_attn = [&](int channels) {
    return std::make_unique<nn::CrossAttention<T>>(channels, config_.cond_dim,
                                                   config_.clip_length, config_.tokens(),
                                                   std::gcd(channels, groups), rng);
  };

  temb1_ = nn::Linear<T>(temb, temb, rng);
  temb2_ = nn::Linear<T>(temb, temb, rng);
  conv_in_ = nn::Conv2d3x3<T>(2, base, rng);

  const int n_levels = static_cast<int>(config_.channel_multipliers.size());
  levels_.resize(n_levels);
  int ch = base;
  for (int i = 0; i < n_levels; ++i) {
    Level& lv = levels_[i];
    lv.resolution = config_.resolution >> i;
    lv.channels = base * config_.channel_multipliers[i];
    lv.down = std::make_unique<nn::ResBlock<T>>(ch, lv.channels, temb, groups, rng);
    if (has_attn(lv.resolution)) lv.down_attn = make_attn(lv.channels);
    ch = lv.channels;
  }
  mid_ = std::make_unique<nn::ResBlock<T>>(ch, ch, temb, groups, rng);
  if (has_attn(levels_.back().resolution)) mid_attn_ = make_attn(ch);
  for (int i = n_levels - 1; i >= 0; --i) {
    Level& lv = levels_[i];
    lv.up_input_channels = ch;
    lv.up = std::make_unique<nn::ResBlock<T>>(ch + lv.channels, lv.channels, temb,
                                              groups, rng);
    if (has_attn(lv.resolution)) lv.up_attn = make_attn(lv.channels);
    ch = lv.channels;
  }
  out_norm_ = nn::GroupNorm<T>(ch, std::gcd(ch, groups));
  conv_out_ = nn::Conv2d3x3<T>(ch, 1, rng);
}

template <typename T>
nn::ParamRefs<T> UNet3D<T>::Params() {
  nn::ParamRefs<T> out;
  temb1_.Collect("temb1.", &out);
  temb2_.Collect("temb2.", &out);
  conv_in_.Collect("conv_in.", &out);
  for (size_t i = 0; i < levels_.size(); ++i) {
    const std::string p = "down" + std::to_string(i) + ".";
    levels_[i].down->Collect(p + "res.", &out);
    if (levels_[i].down_attn) levels_[i].down_attn->Collect(p + "attn.", &out);
  }
  mid_->Collect("mid.res.", &out);
  if (mid_attn_) mid_attn_->Collect("mid.attn.", &out);
  for (size_t i = levels_.size(); i-- > 0;) {
    const std::string p = "up" + std::to_string(i) + ".";
    levels_[i].up->Collect(p + "res.", &out);
    if (levels_[i].up_attn) levels_[i].up_attn->Collect(p + "attn.", &out);
  }
  out_norm_.Collect("out_norm.", &out);
  conv_out_.Collect("conv_out.", &out);
  return out;
}

template <typename T>
int64_t UNet3D<T>::NumParameters() {
  int64_t n = 0;
  for (auto& [name, p] : Params()) n += p->value.size();
  return n;
}

template <typename T>
Tensor<T> UNet3D<T>::Predict(const Tensor<T>& x_t, const std::vector<int>& timesteps,
                             const Tensor<T>& cond, const Tensor<T>& init_frame) {
  const int64_t res = config_.resolution, len = config_.clip_length;
  if (x_t.rank() != 5 || x_t.dim(1) != len || x_t.dim(2) != res || x_t.dim(3) != res ||
      x_t.dim(4) != 1) {
    Fail(ErrorKind::kShapeMismatch, "denoiser input " + ShapeToString(x_t.shape()) +
                                        " does not match [B, " + std::to_string(len) +
                                        ", " + std::to_string(res) + ", " +
                                        std::to_string(res) + ", 1]");
  }
  const int64_t b = x_t.dim(0);
  RequireSameShape(init_frame.shape(), {b, res, res, 1}, "init_frame");
  RequireSameShape(cond.shape(), {b, config_.tokens(), config_.cond_dim}, "cond tokens");
  if (static_cast<int64_t>(timesteps.size()) != b) {
    Fail(ErrorKind::kShapeMismatch, "expected one timestep per batch element");
  }
  batch_ = b;

  // [B, L, H, W, 1] is [B, 1, L, H, W] in memory.
  Tensor<T> noisy = x_t.Reshaped({b, 1, len, res, res});
  Tensor<T> init({b, 1, len, res, res});
  const int64_t plane = res * res;
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t l = 0; l < len; ++l) {
      std::copy(init_frame.data() + i * plane, init_frame.data() + (i + 1) * plane,
                init.data() + (i * len + l) * plane);
    }
  }

  Tensor<T> temb = nn::TimestepEmbedding<T>(timesteps, config_.temb_dim());
  temb = temb_act2_.Forward(temb2_.Forward(temb_act1_.Forward(temb1_.Forward(temb))));

  Tensor<T> h = conv_in_.Forward(nn::ConcatChannels(noisy, init));
  std::vector<Tensor<T>> skips;
  for (size_t i = 0; i < levels_.size(); ++i) {
    Level& lv = levels_[i];
    h = lv.down->Forward(h, temb);
    if (lv.down_attn) h = lv.down_attn->Forward(h, cond);
    skips.push_back(h);
    if (i + 1 < levels_.size()) h = nn::AvgPool2(h);
  }
  h = mid_->Forward(h, temb);
  if (mid_attn_) h = mid_attn_->Forward(h, cond);
  for (size_t i = levels_.size(); i-- > 0;) {
    Level& lv = levels_[i];
    h = lv.up->Forward(nn::ConcatChannels(h, skips[i]), temb);
    if (lv.up_attn) h = lv.up_attn->Forward(h, cond);
    if (i > 0) h = nn::Upsample2(h);
  }
  h = conv_out_.Forward(out_act_.Forward(out_norm_.Forward(h)));
  return h.Reshaped(x_t.shape());
}

template <typename T>
void UNet3D<T>::Backward(const Tensor<T>& grad_eps) {
  const int64_t res = config_.resolution, len = config_.clip_length;
  Tensor<T> g = grad_eps.Reshaped({batch_, 1, len, res, res});
  g = out_norm_.Backward(out_act_.Backward(conv_out_.Backward(g)));
  Tensor<T> g_temb({batch_, config_.temb_dim()});

  std::vector<Tensor<T>> skip_grads(levels_.size());
  for (size_t i = 0; i < levels_.size(); ++i) {
    Level& lv = levels_[i];
    if (i > 0) g = nn::Upsample2Backward(g);
    if (lv.up_attn) g = lv.up_attn->Backward(g);
    g = lv.up->Backward(g, &g_temb);
    auto [g_below, g_skip] = nn::SplitChannels(g, lv.up_input_channels);
    g = std::move(g_below);
    skip_grads[i] = std::move(g_skip);
  }
  if (mid_attn_) g = mid_attn_->Backward(g);
  g = mid_->Backward(g, &g_temb);
  for (size_t i = levels_.size(); i-- > 0;) {
    Level& lv = levels_[i];
    if (i + 1 < levels_.size()) g = nn::AvgPool2Backward(g);
    nn::AddInPlace(&g, skip_grads[i]);
    if (lv.down_attn) g = lv.down_attn->Backward(g);
    g = lv.down->Backward(g, &g_temb);
  }
  conv_in_.Backward(g);
  temb1_.Backward(temb_act1_.Backward(temb2_.Backward(temb_act2_.Backward(g_temb))));
}

template class UNet3D<float>;
template class UNet3D<double>;

}  // namespace tractdiff
