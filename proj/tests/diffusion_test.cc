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
#include <random>

#include "doctest.h"
#include "tractdiff/diffusion.h"
#include "tractdiff/schedule.h"
#include "tractdiff/toy_corpus.h"

namespace td = tractdiff;

TEST_CASE("schedules are monotone and bounded") {
  for (auto kind : {td::ScheduleKind::kLinear, td::ScheduleKind::kCosine}) {
    const td::NoiseSchedule s = td::MakeSchedule(1000, kind);
    REQUIRE(s.steps == 1000);
    for (int t = 1; t <= 1000; ++t) {
      REQUIRE(s.beta(t) > 0.0);
      REQUIRE(s.beta(t) <= 0.999);
      REQUIRE(s.alpha(t) == doctest::Approx(1.0 - s.beta(t)));
      if (t > 1) REQUIRE(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
    CHECK(s.alpha_bar(1000) < 1e-3);
    CHECK(s.alpha_bar_prev(1) == 1.0);
  }
  const td::NoiseSchedule lin = td::MakeSchedule(1000, td::ScheduleKind::kLinear);
  CHECK(lin.beta(1) == doctest::Approx(1e-4));
  CHECK(lin.beta(1000) == doctest::Approx(2e-2));
  CHECK(td::ParseScheduleKind(td::ScheduleKindName(td::ScheduleKind::kCosine)) ==
        td::ScheduleKind::kCosine);
}

TEST_CASE("cumulative products match an independent recomputation") {
  const td::NoiseSchedule s = td::MakeSchedule(200, td::ScheduleKind::kLinear);
  double prod = 1.0;
  for (int t = 1; t <= 200; ++t) {
    prod *= 1.0 - s.beta(t);
    REQUIRE(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-12));
  }
}

TEST_CASE("respacing keeps alpha_bar at the kept steps") {
  const td::NoiseSchedule base = td::MakeSchedule(1000, td::ScheduleKind::kCosine);
  const td::RespacedSchedule r = td::Respace(base, 50);
  REQUIRE(r.timesteps.size() == 50);
  CHECK(r.timesteps.front() == 20);
  CHECK(r.timesteps.back() == 1000);
  for (int i = 1; i <= 50; ++i) {
    CHECK(r.schedule.alpha_bar(i) == doctest::Approx(base.alpha_bar(r.timesteps[i - 1])));
  }
  const td::RespacedSchedule full = td::Respace(base, 1000);
  for (int t = 1; t <= 1000; ++t) REQUIRE(full.timesteps[t - 1] == t);
}

TEST_CASE("q_sample mixes signal and noise by alpha_bar") {
  const td::NoiseSchedule s = td::MakeSchedule(100, td::ScheduleKind::kLinear);
  td::TensorD x0({4}, {1, -1, 0.5, 0});
  td::TensorD e({4}, {0.1, 0.2, -0.3, 1});
  const td::TensorD xt = td::QSample(x0, 37, e, s);
  const double ab = s.alpha_bar(37);
  for (int i = 0; i < 4; ++i) {
    CHECK(xt[i] == doctest::Approx(std::sqrt(ab) * x0[i] + std::sqrt(1 - ab) * e[i]));
  }
  CHECK_THROWS_AS(td::QSample(x0, 0, e, s), td::Error);
  CHECK_THROWS_AS(td::QSample(x0, 101, e, s), td::Error);
}

TEST_CASE("range conversion round trips") {
  td::TensorF x({3}, {0.0f, 0.25f, 1.0f});
  const td::TensorF m = td::ToModelRange(x);
  CHECK(m[0] == -1.0f);
  CHECK(m[2] == 1.0f);
  CHECK(td::FromModelRange(m) == x);
  CHECK(td::FromModelRange(td::TensorF({1}, 3.0f))[0] == 1.0f);
}

TEST_CASE("dropout extremes") {
  std::mt19937_64 rng(0);
  td::TensorF cond({50, 2, 2}, 1.0f);
  auto mask = td::ApplyCfgDropout(&cond, 0.0, rng);
  CHECK(std::count(mask.begin(), mask.end(), true) == 0);
  mask = td::ApplyCfgDropout(&cond, 1.0, rng);
  CHECK(std::count(mask.begin(), mask.end(), true) == 50);
  for (float v : cond.values()) REQUIRE(v == 0.0f);
  CHECK_THROWS_AS(td::ApplyCfgDropout(&cond, 1.5, rng), td::Error);
}

TEST_CASE("batches are in model range and pool when asked") {
  const auto rec = td::AlignAndTruncate(td::GenerateToyCorpus(1, 1, 0.5, 16, 0)[0]);
  td::EmbeddingSequence emb;
  emb.vectors = td::TensorF({rec.num_frames(), 3}, 2.0f);
  const auto clips = td::WindowClips(rec, emb);
  std::vector<const td::TrainingExample*> ptrs = {&clips[0], &clips[1]};
  std::mt19937_64 rng(1);
  const auto batch = td::MakeBatch(ptrs, false, 0.0, rng);
  CHECK(batch.x0.shape() == td::Shape{2, 10, 16, 16, 1});
  CHECK(batch.cond.shape() == td::Shape{2, 10, 3});
  CHECK(batch.init_frame.shape() == td::Shape{2, 16, 16, 1});
  CHECK(batch.x0[0] == doctest::Approx(2 * clips[0].frames[0] - 1));
  const auto pooled = td::MakeBatch(ptrs, true, 0.0, rng);
  CHECK(pooled.cond.shape() == td::Shape{2, 1, 3});
  CHECK(pooled.cond[0] == doctest::Approx(2.0));
}

namespace {

// eps = x_t: the loss is the mean of (x_t - noise)^2.
class IdentityDenoiser : public td::TrainableDenoiser<double> {
 public:
  int clip_length() const override { return 2; }
  td::TensorD Predict(const td::TensorD& x_t, const std::vector<int>&, const td::TensorD&,
                      const td::TensorD&) override {
    return x_t;
  }
  void Backward(const td::TensorD& g) override { last_grad = g; }
  td::nn::ParamRefs<double> Params() override { return {}; }
  td::TensorD last_grad;
};

}  // namespace

TEST_CASE("training loss and its output gradient") {
  const td::NoiseSchedule s = td::MakeSchedule(10, td::ScheduleKind::kLinear);
  td::DiffusionBatch<double> b;
  b.x0 = td::TensorD({1, 2, 1, 1, 1}, {0.5, -0.5});
  b.cond = td::TensorD({1, 2, 1});
  b.init_frame = td::TensorD({1, 1, 1, 1});
  td::LossDraw<double> d;
  d.timesteps = {4};
  d.noise = td::TensorD({1, 2, 1, 1, 1}, {1.0, 0.0});
  IdentityDenoiser m;
  const double ab = s.alpha_bar(4);
  double want = 0;
  for (int i = 0; i < 2; ++i) {
    const double xt = std::sqrt(ab) * b.x0[i] + std::sqrt(1 - ab) * d.noise[i];
    want += (xt - d.noise[i]) * (xt - d.noise[i]) / 2;
  }
  CHECK(td::TrainingLossWith<double>(m, b, s, d) == doctest::Approx(want));
  CHECK(td::TrainingLossAndGrad<double>(m, b, s, d) == doctest::Approx(want));
  const double xt0 = std::sqrt(ab) * 0.5 + std::sqrt(1 - ab);
  CHECK(m.last_grad[0] == doctest::Approx(xt0 - 1.0));
}
