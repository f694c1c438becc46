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

#include "tractdiff/sampler.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tractdiff/corpus.h"
#include "tractdiff/diffusion.h"
#include "tractdiff/raw_tensor_io.h"

namespace tractdiff {

template <typename T>
Tensor<T> CfgCombine(const Tensor<T>& eps_cond, const Tensor<T>& eps_uncond, double w) {
  RequireSameShape(eps_cond.shape(), eps_uncond.shape(), "cfg_combine");
  if (w == 1.0) return eps_cond;
  if (w == 0.0) return eps_uncond;
  Tensor<T> out(eps_cond.shape());
  const T wt = static_cast<T>(w);
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] = eps_uncond[i] + wt * (eps_cond[i] - eps_uncond[i]);
  }
  return out;
}

template <typename T>
Tensor<T> ReverseStep(const Tensor<T>& x_t, const Tensor<T>& eps, int t,
                      const NoiseSchedule& sched, const Tensor<T>* noise, bool clip_x0) {
  RequireSameShape(x_t.shape(), eps.shape(), "reverse_step");
  if (t < 1 || t > sched.steps) {
    Fail(ErrorKind::kOutOfRange, "timestep " + std::to_string(t) + " outside schedule");
  }
  if (t > 1) {
    if (noise == nullptr) Fail(ErrorKind::kBadArgument, "reverse_step needs noise for t > 1");
    RequireSameShape(x_t.shape(), noise->shape(), "reverse_step noise");
  }
  const double beta = sched.beta(t), alpha = sched.alpha(t);
  const double ab = sched.alpha_bar(t), ab_prev = sched.alpha_bar_prev(t);
  const double sigma = t > 1 ? std::sqrt(sched.posterior_variance(t)) : 0.0;
  Tensor<T> out(x_t.shape());
  if (!clip_x0) {
    const double eps_coef = beta / std::sqrt(1.0 - ab);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    for (int64_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<T>((x_t[i] - eps_coef * eps[i]) * inv_sqrt_alpha);
    }
  } else {
    const double sqrt_ab = std::sqrt(ab), sqrt_1mab = std::sqrt(1.0 - ab);
    const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
    const double ct = std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab);
    for (int64_t i = 0; i < out.size(); ++i) {
      const double x0 = std::clamp((x_t[i] - sqrt_1mab * eps[i]) / sqrt_ab, -1.0, 1.0);
      out[i] = static_cast<T>(c0 * x0 + ct * x_t[i]);
    }
  }
  if (t > 1) {
    for (int64_t i = 0; i < out.size(); ++i) out[i] += static_cast<T>(sigma * (*noise)[i]);
  }
  return out;
}

template Tensor<float> CfgCombine(const Tensor<float>&, const Tensor<float>&, double);
template Tensor<double> CfgCombine(const Tensor<double>&, const Tensor<double>&, double);
template Tensor<float> ReverseStep(const Tensor<float>&, const Tensor<float>&, int,
                                   const NoiseSchedule&, const Tensor<float>*, bool);
template Tensor<double> ReverseStep(const Tensor<double>&, const Tensor<double>&, int,
                                    const NoiseSchedule&, const Tensor<double>*, bool);

TensorF SampleClip(Denoiser<float>& model, const TensorF& cond, const TensorF& init_frame,
                   const NoiseSchedule& sched, const SampleOptions& options,
                   std::mt19937_64& rng) {
  if (init_frame.rank() != 3 || init_frame.dim(2) != 1) {
    Fail(ErrorKind::kShapeMismatch, "init_frame must be [H, W, 1], got " +
                                        ShapeToString(init_frame.shape()));
  }
  if (cond.rank() != 2) {
    Fail(ErrorKind::kShapeMismatch, "cond must be [M, D], got " + ShapeToString(cond.shape()));
  }
  if (options.cfg_scale < 0.0) Fail(ErrorKind::kBadArgument, "cfg_scale must be >= 0");
  const int64_t len = model.clip_length(), h = init_frame.dim(0), w = init_frame.dim(1);
  const RespacedSchedule rs = Respace(sched, std::min(options.n_steps, sched.steps));

  const Shape x_shape{1, len, h, w, 1};
  const TensorF init = ToModelRange(init_frame).Reshaped({1, h, w, 1});
  const TensorF c = cond.Reshaped({1, cond.dim(0), cond.dim(1)});
  const TensorF null_cond(c.shape());
  TensorF x = StandardNormal<float>(x_shape, rng);
  TensorF init_noise;
  if (options.reimpose_init) init_noise = StandardNormal<float>(init.shape(), rng);
  const int64_t plane = h * w;

  for (int i = rs.schedule.steps; i >= 1; --i) {
    const std::vector<int> t_model{rs.timesteps[i - 1]};
    if (options.reimpose_init) {
      const TensorF pinned = QSampleAt(init, rs.schedule.alpha_bar(i), init_noise);
      std::copy(pinned.data(), pinned.data() + plane, x.data());
    }
    TensorF eps;
    if (options.cfg_scale == 1.0) {
      eps = model.Predict(x, t_model, c, init);
    } else if (options.cfg_scale == 0.0) {
      eps = model.Predict(x, t_model, null_cond, init);
    } else {
      const TensorF eps_c = model.Predict(x, t_model, c, init);
      const TensorF eps_u = model.Predict(x, t_model, null_cond, init);
      eps = CfgCombine(eps_c, eps_u, options.cfg_scale);
    }
    TensorF noise;
    if (i > 1) noise = StandardNormal<float>(x_shape, rng);
    x = ReverseStep(x, eps, i, rs.schedule, i > 1 ? &noise : nullptr, options.clip_x0);
  }
  if (options.reimpose_init) std::copy(init.data(), init.data() + plane, x.data());
  return FromModelRange(x).Reshaped({len, h, w, 1});
}

nlohmann::json GenerationRequest::Echo() const {
  auto digest = [](std::span<const float> values) {
    std::vector<char> bytes(values.size() * sizeof(float));
    if (!values.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
    return HexDigest(bytes);
  };
  return {{"cfg_scale", cfg_scale},
          {"n_sample_steps", n_sample_steps},
          {"seed", seed},
          {"encoder_id", encoder_id},
          {"pooled", pooled},
          {"reimpose_init", reimpose_init},
          {"sample_rate", waveform.sample_rate},
          {"n_samples", waveform.samples.size()},
          {"audio_digest", digest(waveform.samples)},
          {"init_frame_shape", init_frame.shape()},
          {"init_frame_digest", digest(init_frame.values())}};
}

GeneratedVideo SampleLong(Denoiser<float>& model, const NoiseSchedule& sched,
                          const GenerationRequest& request, const EncoderPlugin& plugin) {
  Waveform wave = request.waveform;
  if (wave.sample_rate != kSampleRate) {
    wave.samples = ResampleAudio(wave.samples, wave.sample_rate, kSampleRate);
    wave.sample_rate = kSampleRate;
  }
  const int64_t n_frames = static_cast<int64_t>(wave.samples.size()) / kSamplesPerFrame;
  if (n_frames == 0) {
    Fail(ErrorKind::kEmptyAudio, "waveform shorter than one 20 ms frame");
  }
  const int len = model.clip_length();
  const int64_t n_clips = (n_frames + len - 1) / len;

  EmbeddingSequence seq;
  try {
    seq = plugin.Encode(wave);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kEncoderFailure) throw;
    Fail(ErrorKind::kEncoderFailure, e.what());
  } catch (const std::exception& e) {
    Fail(ErrorKind::kEncoderFailure, e.what());
  }
  if (seq.dim() != plugin.dim()) {
    Fail(ErrorKind::kDimensionMismatch, "encoder returned D = " + std::to_string(seq.dim()) +
                                            ", declared " + std::to_string(plugin.dim()));
  }
  seq = FitToLength(FitToLength(std::move(seq), n_frames), n_clips * len);

  SampleOptions options;
  options.cfg_scale = request.cfg_scale;
  options.n_steps = request.n_sample_steps;
  options.reimpose_init = request.reimpose_init;
  std::mt19937_64 rng(request.seed);

  const int64_t h = request.init_frame.dim(0), w = request.init_frame.dim(1);
  const int64_t frame_size = h * w;
  GeneratedVideo out;
  out.frames = TensorF({n_frames, h, w, 1});
  out.request_echo = request.Echo();
  TensorF init = request.init_frame;
  for (int64_t k = 0; k < n_clips; ++k) {
    const TensorF window = SliceForClip(seq, k * len * kEmbeddingStrideSeconds, len);
    const TensorF clip = SampleClip(model, ConditioningTokens(window, request.pooled), init,
                                    sched, options, rng);
    const int64_t start = k * len;
    const int64_t keep = std::min<int64_t>(len, n_frames - start);
    std::copy(clip.data(), clip.data() + keep * frame_size,
              out.frames.data() + start * frame_size);
    out.clip_boundaries.push_back(start);
    init = clip.Slice0(len - 1);
  }
  return out;
}

}  // namespace tractdiff
