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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "tractdiff/tensor.h"

namespace tractdiff {

// Mean SSIM over all positions where an 11x11 Gaussian window (sigma 1.5)
// fits entirely inside the image, L = 1, C1 = 0.01^2, C2 = 0.03^2.
// Images are [H, W] or [H, W, 1].
double Ssim(const TensorF& a, const TensorF& b);

// Mean of per-frame SSIM over [T, H, W(, 1)] videos.
double SsimVideo(const TensorF& a, const TensorF& b);

struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  int64_t n = 0;
};

// Sample mean and unbiased covariance of the rows of [n, D] features.
GaussianStats FitGaussian(const Eigen::MatrixXd& features);

// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2), square roots by
// symmetric eigendecomposition with negative eigenvalues clamped to 0.
double FrechetDistance(const GaussianStats& a, const GaussianStats& b);

// Video -> feature vector. Must be a pure function of the video.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string extractor_id() const = 0;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd Extract(const TensorF& video) const = 0;
};

// Indices into MockRawFeatures. The first nine are unchanged by reversing
// time; the last four (first-to-last drift) change sign.
enum MockFeature {
  kMeanOfMean, kStdOfMean,
  kMeanOfVariance, kStdOfVariance,
  kMeanOfCentroidRow, kStdOfCentroidRow,
  kMeanOfCentroidCol, kStdOfCentroidCol,
  kMeanDiffEnergy,
  kDriftMean, kDriftVariance, kDriftCentroidRow, kDriftCentroidCol,
  kNumMockRawFeatures
};
inline constexpr int kNumTimeSymmetricFeatures = 9;

// Per-frame spatial moments (mean, variance, intensity centroid) and
// frame-difference energy, aggregated over time.
Eigen::VectorXd MockRawFeatures(const TensorF& video);

// MockRawFeatures times a fixed random projection to `dim`.
class MockExtractor : public FeatureExtractor {
 public:
  explicit MockExtractor(int dim = 16);
  std::string extractor_id() const override { return "mock"; }
  int dim() const override { return dim_; }
  Eigen::VectorXd Extract(const TensorF& video) const override;

 private:
  int dim_;
  Eigen::MatrixXd projection_;  // [dim, kNumMockRawFeatures]
};

Eigen::MatrixXd ExtractAll(const std::vector<TensorF>& videos, const FeatureExtractor& fx);

double Fvd(const std::vector<TensorF>& real, const std::vector<TensorF>& gen,
           const FeatureExtractor& fx);
double FvdFromFeatures(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen);

struct EvalReport {
  std::string split;  // speech, subject or both
  double fvd = 0.0;
  double fvd_stderr = 0.0;
  double ssim_mean = 0.0;
  double ssim_stderr = 0.0;
  int64_t n_videos = 0;
  std::string extractor_id;
  std::string encoder_id;

  nlohmann::json ToJson() const;
};

inline constexpr int kBootstrapResamples = 200;

// FVD and paired SSIM between real[i] and gen[i], with bootstrap standard
// errors over videos.
EvalReport EvaluateSplit(const std::string& split, const std::vector<TensorF>& real,
                         const std::vector<TensorF>& gen, const FeatureExtractor& fx,
                         const std::string& encoder_id, uint64_t seed = 0,
                         int resamples = kBootstrapResamples);

// Plain-text table with one row per split.
std::string FormatEvalTable(const std::vector<EvalReport>& reports);

}  // namespace tractdiff
