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

#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "tractdiff/diffusion.h"
#include "tractdiff/sampler.h"
#include "tractdiff/speech_encoding.h"

namespace td = tractdiff;

namespace {

// Predicts eps from a fixed x0 target; counts calls and the null calls.
class TargetDenoiser : public td::Denoiser<float> {
 public:
  TargetDenoiser(const td::NoiseSchedule& s, float target) : sched_(s), target_(target) {}
  int clip_length() const override { return 4; }
  td::TensorF Predict(const td::TensorF& x_t, const std::vector<int>& t, const td::TensorF& cond,
                      const td::TensorF&) override {
    ++calls;
    bool null = true;
    for (float v : cond.values()) null &= (v == 0.0f);
    null_calls += null;
    const double ab = sched_.alpha_bar(t[0]);
    td::TensorF eps(x_t.shape());
    for (int64_t i = 0; i < eps.size(); ++i) {
      eps[i] = static_cast<float>((x_t[i] - std::sqrt(ab) * target_) / std::sqrt(1 - ab));
    }
    return eps;
  }
  int calls = 0, null_calls = 0;

 private:
  const td::NoiseSchedule& sched_;
  float target_;
};

}  // namespace

TEST_CASE("reverse step matches the posterior mean formula") {
  const td::NoiseSchedule s = td::MakeSchedule(100, td::ScheduleKind::kLinear);
  td::TensorD x({3}, {0.3, -1.2, 2.0}), eps({3}, {0.5, 0.1, -0.7}), z({3}, {1.0, -1.0, 0.2});
  const int t = 40;
  const auto out = td::ReverseStep<double>(x, eps, t, s, &z);
  for (int i = 0; i < 3; ++i) {
    const double mu = (x[i] - s.beta(t) / std::sqrt(1 - s.alpha_bar(t)) * eps[i]) /
                      std::sqrt(s.alpha(t));
    CHECK(out[i] == doctest::Approx(mu + std::sqrt(s.posterior_variance(t)) * z[i]));
  }
  CHECK_THROWS_AS(td::ReverseStep<double>(x, eps, t, s, nullptr), td::Error);
}

TEST_CASE("x0 clipping bounds the implied sample") {
  const td::NoiseSchedule s = td::MakeSchedule(100, td::ScheduleKind::kLinear);
  td::TensorD x({1}, {5.0}), eps({1}, {0.0});
  const auto clipped = td::ReverseStep<double>(x, eps, 1, s, nullptr, true);
  CHECK(clipped[0] == doctest::Approx(1.0));
  const auto raw = td::ReverseStep<double>(x, eps, 1, s, nullptr, false);
  CHECK(raw[0] > 4.0);
}

TEST_CASE("sampling converges to the denoiser's target") {
  const td::NoiseSchedule s = td::MakeSchedule(1000, td::ScheduleKind::kCosine);
  TargetDenoiser m(s, 0.5f);  // model range 0.5 -> 0.75 in [0, 1]
  td::SampleOptions opt;
  opt.n_steps = 25;
  std::mt19937_64 rng(0);
  const td::TensorF out =
      td::SampleClip(m, td::TensorF({4, 3}, 1.0f), td::TensorF({4, 4, 1}, 0.2f), s, opt, rng);
  CHECK(out.shape() == td::Shape{4, 4, 4, 1});
  for (float v : out.values()) CHECK(v == doctest::Approx(0.75).epsilon(1e-3));
  CHECK(m.calls == 50);
  CHECK(m.null_calls == 25);
}

TEST_CASE("guidance scale 0 and 1 use a single evaluation") {
  const td::NoiseSchedule s = td::MakeSchedule(1000, td::ScheduleKind::kCosine);
  for (double w : {0.0, 1.0}) {
    TargetDenoiser m(s, 0.0f);
    td::SampleOptions opt;
    opt.n_steps = 10;
    opt.cfg_scale = w;
    std::mt19937_64 rng(1);
    td::SampleClip(m, td::TensorF({4, 3}, 1.0f), td::TensorF({4, 4, 1}), s, opt, rng);
    CHECK(m.calls == 10);
    CHECK(m.null_calls == (w == 0.0 ? 10 : 0));
  }
}

namespace {

// eps = 0.3 x_t: the result depends on every noise draw.
class ScaledDenoiser : public td::Denoiser<float> {
 public:
  int clip_length() const override { return 4; }
  td::TensorF Predict(const td::TensorF& x_t, const std::vector<int>&, const td::TensorF&,
                      const td::TensorF&) override {
    td::TensorF eps = x_t;
    for (float& v : eps.storage()) v *= 0.3f;
    return eps;
  }
};

}  // namespace

TEST_CASE("sampling is reproducible from the seed") {
  const td::NoiseSchedule s = td::MakeSchedule(1000, td::ScheduleKind::kCosine);
  ScaledDenoiser m;
  td::SampleOptions opt;
  opt.n_steps = 5;
  std::mt19937_64 r1(3), r2(3), r3(4);
  const td::TensorF cond({4, 3}, 1.0f), init({4, 4, 1}, 0.5f);
  const auto a = td::SampleClip(m, cond, init, s, opt, r1);
  CHECK(td::SampleClip(m, cond, init, s, opt, r2) == a);
  CHECK(td::SampleClip(m, cond, init, s, opt, r3) != a);
}

TEST_CASE("long generation validates its request") {
  const td::NoiseSchedule s = td::MakeSchedule(1000, td::ScheduleKind::kCosine);
  TargetDenoiser m(s, 0.0f);
  td::GenerationRequest req;
  req.init_frame = td::TensorF({4, 4, 1});
  req.n_sample_steps = 3;
  try {
    td::SampleLong(m, s, req, td::MockEncoder(3));
    FAIL("expected EmptyAudio");
  } catch (const td::Error& e) {
    CHECK(e.kind() == td::ErrorKind::kEmptyAudio);
  }
  req.waveform.samples.assign(16000, 0.01f);
  try {
    td::SampleLong(m, s, req, td::MockEncoder(3));
  } catch (...) {
    FAIL("unexpected failure");
  }
}

TEST_CASE("long generation resamples audio and echoes the request") {
  const td::NoiseSchedule s = td::MakeSchedule(1000, td::ScheduleKind::kCosine);
  TargetDenoiser m(s, 0.0f);
  td::GenerationRequest req;
  req.waveform.sample_rate = 8000;
  req.waveform.samples.assign(4000, 0.01f);  // 0.5 s -> 25 frames
  req.init_frame = td::TensorF({4, 4, 1}, 0.3f);
  req.n_sample_steps = 2;
  req.seed = 17;
  const td::GeneratedVideo v = td::SampleLong(m, s, req, td::MockEncoder(3));
  CHECK(v.frames.dim(0) == 25);
  CHECK(v.clip_boundaries == std::vector<int64_t>{0, 4, 8, 12, 16, 20, 24});
  CHECK(v.request_echo.at("seed") == 17);
  CHECK(v.request_echo.at("cfg_scale") == 2.0);
  CHECK_FALSE(v.request_echo.contains("waveform"));
}

namespace {

class BrokenEncoder : public td::EncoderPlugin {
 public:
  explicit BrokenEncoder(bool throws) : throws_(throws) {}
  std::string encoder_id() const override { return "broken"; }
  int dim() const override { return 3; }
  td::EmbeddingSequence Encode(const td::Waveform& w) const override {
    if (throws_) throw std::runtime_error("plugin crashed");
    return td::MockEncode(w.samples, 5);
  }

 private:
  bool throws_;
};

td::ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const td::Error& e) {
    return e.kind();
  }
  FAIL("no error");
  return td::ErrorKind::kBadArgument;
}

}  // namespace

TEST_CASE("long generation maps encoder problems to typed errors") {
  const td::NoiseSchedule s = td::MakeSchedule(1000, td::ScheduleKind::kCosine);
  TargetDenoiser m(s, 0.0f);
  td::GenerationRequest req;
  req.waveform.samples.assign(3200, 0.01f);
  req.init_frame = td::TensorF({4, 4, 1});
  req.n_sample_steps = 2;
  CHECK(KindOf([&] { td::SampleLong(m, s, req, BrokenEncoder(true)); }) ==
        td::ErrorKind::kEncoderFailure);
  CHECK(KindOf([&] { td::SampleLong(m, s, req, BrokenEncoder(false)); }) ==
        td::ErrorKind::kDimensionMismatch);
}
