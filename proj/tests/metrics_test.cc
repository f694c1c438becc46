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

#include <random>

#include "doctest.h"
#include "tractdiff/metrics.h"

namespace td = tractdiff;

namespace {

td::TensorF Noise(std::mt19937_64& rng, td::Shape shape, float lo = 0, float hi = 1) {
  std::uniform_real_distribution<float> u(lo, hi);
  td::TensorF t(shape);
  for (float& v : t.storage()) v = u(rng);
  return t;
}

std::vector<td::TensorF> Videos(std::mt19937_64& rng, int n, float offset) {
  std::vector<td::TensorF> out;
  for (int i = 0; i < n; ++i) {
    td::TensorF v = Noise(rng, {6, 16, 16, 1}, 0.0f, 0.5f);
    for (int64_t t = 0; t < 6; ++t) {
      for (float& x : v.Slab0(t)) x += offset * t / 5.0f;
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("ssim properties") {
  std::mt19937_64 rng(0);
  const td::TensorF a = Noise(rng, {32, 32});
  const td::TensorF b = Noise(rng, {32, 32});
  CHECK(td::Ssim(a, a) == 1.0);
  CHECK(td::Ssim(a, b) == doctest::Approx(td::Ssim(b, a)));
  CHECK(td::Ssim(a, b) < 0.2);
  CHECK(td::Ssim(a, b) >= -1.0);
  CHECK(td::Ssim(a.Reshaped({32, 32, 1}), b.Reshaped({32, 32, 1})) == td::Ssim(a, b));
  CHECK_THROWS_AS(td::Ssim(td::TensorF({10, 10}), td::TensorF({10, 10})), td::Error);
  CHECK_THROWS_AS(td::Ssim(td::TensorF({12, 12}), td::TensorF({12, 13})), td::Error);
}

TEST_CASE("ssim degrades with noise") {
  std::mt19937_64 rng(1);
  const td::TensorF a = Noise(rng, {24, 24});
  double prev = 1.0;
  for (float amount : {0.05f, 0.2f, 0.5f}) {
    td::TensorF b = a;
    const td::TensorF n = Noise(rng, {24, 24}, -amount, amount);
    for (int64_t i = 0; i < b.size(); ++i) b[i] += n[i];
    const double s = td::Ssim(a, b);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("video ssim is the mean over frames") {
  std::mt19937_64 rng(2);
  const td::TensorF a = Noise(rng, {3, 12, 12, 1}), b = Noise(rng, {3, 12, 12, 1});
  double want = 0;
  for (int t = 0; t < 3; ++t) want += td::Ssim(a.Slice0(t), b.Slice0(t)) / 3;
  CHECK(td::SsimVideo(a, b) == doctest::Approx(want));
}

TEST_CASE("gaussian fit and frechet distance") {
  Eigen::MatrixXd f(4, 2);
  f << 1, 2, 3, 4, 5, 6, 7, 9;
  const auto s = td::FitGaussian(f);
  CHECK(s.mu[0] == doctest::Approx(4.0));
  CHECK(s.sigma(0, 0) == doctest::Approx(20.0 / 3.0));
  CHECK(td::FrechetDistance(s, s) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_AS(td::FitGaussian(Eigen::MatrixXd(1, 2)), td::Error);

  // Full covariances: symmetric and non-negative, matches a commuting case.
  Eigen::MatrixXd r(2, 2);
  r << 0.8, -0.6, 0.6, 0.8;
  td::GaussianStats a{Eigen::Vector2d(0, 0), r * Eigen::Vector2d(4, 1).asDiagonal() * r.transpose(), 10};
  td::GaussianStats b{Eigen::Vector2d(1, 0), r * Eigen::Vector2d(1, 9).asDiagonal() * r.transpose(), 10};
  const double want = 1 + (4 + 1 - 4) + (1 + 9 - 6);
  CHECK(td::FrechetDistance(a, b) == doctest::Approx(want).epsilon(1e-9));
  CHECK(td::FrechetDistance(b, a) == doctest::Approx(want).epsilon(1e-9));
  td::GaussianStats wrong{Eigen::Vector3d(0, 0, 0), Eigen::Matrix3d::Identity(), 10};
  CHECK_THROWS_AS(td::FrechetDistance(a, wrong), td::Error);
}

TEST_CASE("mock features: time symmetry of the first block, drift sign") {
  std::mt19937_64 rng(3);
  const td::TensorF v = Videos(rng, 1, 0.4f)[0];
  td::TensorF rev(v.shape());
  const int64_t frames = v.dim(0), plane = v.size() / frames;
  for (int64_t t = 0; t < frames; ++t) {
    std::copy(v.data() + t * plane, v.data() + (t + 1) * plane,
              rev.data() + (frames - 1 - t) * plane);
  }
  const Eigen::VectorXd fa = td::MockRawFeatures(v), fb = td::MockRawFeatures(rev);
  REQUIRE(fa.size() == td::kNumMockRawFeatures);
  for (int i = 0; i < td::kNumTimeSymmetricFeatures; ++i) {
    CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-9));
  }
  CHECK(fa[td::kDriftMean] == doctest::Approx(-fb[td::kDriftMean]));
  CHECK(fa[td::kDriftMean] > 0);
  const td::MockExtractor fx;
  CHECK(fx.Extract(v) == td::MockExtractor().Extract(v));
  CHECK(fx.Extract(v).size() == fx.dim());
}

TEST_CASE("fvd separates shifted distributions") {
  std::mt19937_64 rng(4);
  const auto real = Videos(rng, 10, 0.0f);
  const auto near = Videos(rng, 10, 0.0f);
  const auto far = Videos(rng, 10, 0.5f);
  const td::MockExtractor fx;
  CHECK(td::Fvd(real, real, fx) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(td::Fvd(real, far, fx) > td::Fvd(real, near, fx));
  CHECK_THROWS_AS(td::Fvd({real[0]}, far, fx), td::Error);
}

TEST_CASE("split evaluation report") {
  std::mt19937_64 rng(5);
  const auto real = Videos(rng, 6, 0.0f);
  const auto gen = Videos(rng, 6, 0.2f);
  const auto r = td::EvaluateSplit("speech", real, gen, td::MockExtractor(), "mock", 1, 50);
  CHECK(r.n_videos == 6);
  CHECK(r.fvd > 0);
  CHECK(r.fvd_stderr >= 0);
  CHECK(r.ssim_stderr >= 0);
  CHECK(r.ToJson().at("split") == "speech");
  const auto again = td::EvaluateSplit("speech", real, gen, td::MockExtractor(), "mock", 1, 50);
  CHECK(again.fvd_stderr == r.fvd_stderr);
  CHECK(td::FormatEvalTable({r}).find("speech") != std::string::npos);
}
