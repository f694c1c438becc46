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

#include "tractdiff/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

namespace tractdiff {
namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& GaussianTaps() {
  static const std::array<double, kWin> taps = [] {
    std::array<double, kWin> g{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
      const double d = i - kWin / 2;
      g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
  }();
  return taps;
}

// Valid-mode separable filtering of an [h, w] image.
std::vector<double> FilterValid(const std::vector<double>& img, int64_t h, int64_t w) {
  const auto& g = GaussianTaps();
  const int64_t ow = w - kWin + 1, oh = h - kWin + 1;
  std::vector<double> rows(h * ow);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += g[k] * img[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow);
  for (int64_t y = 0; y < oh; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

std::pair<int64_t, int64_t> ImageDims(const TensorF& img) {
  if (img.rank() == 2) return {img.dim(0), img.dim(1)};
  if (img.rank() == 3 && img.dim(2) == 1) return {img.dim(0), img.dim(1)};
  Fail(ErrorKind::kShapeMismatch, "expected an [H, W] or [H, W, 1] image, got " +
                                      ShapeToString(img.shape()));
}

Eigen::MatrixXd SqrtPsd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double StdDev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (v.size() - 1));
}

}  // namespace

double Ssim(const TensorF& a, const TensorF& b) {
  const auto [h, w] = ImageDims(a);
  const auto [hb, wb] = ImageDims(b);
  if (h != hb || w != wb) {
    Fail(ErrorKind::kShapeMismatch,
         "ssim: " + ShapeToString(a.shape()) + " vs " + ShapeToString(b.shape()));
  }
  if (h < kWin || w < kWin) {
    Fail(ErrorKind::kImageTooSmall, "ssim needs at least 11x11 pixels, got " +
                                        std::to_string(h) + "x" + std::to_string(w));
  }
  const int64_t n = h * w;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int64_t i = 0; i < n; ++i) {
    x[i] = a[i];
    y[i] = b[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = FilterValid(x, h, w), my = FilterValid(y, h, w);
  const auto sxx = FilterValid(xx, h, w), syy = FilterValid(yy, h, w);
  const auto sxy = FilterValid(xy, h, w);
  double total = 0.0;
  for (size_t i = 0; i < mx.size(); ++i) {
    const double va = sxx[i] - mx[i] * mx[i];
    const double vb = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + kC1) * (va + vb + kC2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

double SsimVideo(const TensorF& a, const TensorF& b) {
  if (a.rank() < 3 || a.shape() != b.shape()) {
    Fail(ErrorKind::kShapeMismatch,
         "ssim_video: " + ShapeToString(a.shape()) + " vs " + ShapeToString(b.shape()));
  }
  if (a.dim(0) == 0) Fail(ErrorKind::kShapeMismatch, "ssim_video: empty video");
  double total = 0.0;
  for (int64_t t = 0; t < a.dim(0); ++t) total += Ssim(a.Slice0(t), b.Slice0(t));
  return total / static_cast<double>(a.dim(0));
}

GaussianStats FitGaussian(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) {
    Fail(ErrorKind::kTooFewSamples, "need at least 2 feature rows, got " +
                                        std::to_string(features.rows()));
  }
  GaussianStats g;
  g.n = features.rows();
  g.mu = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - g.mu.transpose();
  g.sigma = centered.transpose() * centered / static_cast<double>(g.n - 1);
  return g;
}

double FrechetDistance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != b.sigma.rows()) {
    Fail(ErrorKind::kDimensionMismatch, "Gaussian stats of dimension " +
                                            std::to_string(a.mu.size()) + " vs " +
                                            std::to_string(b.mu.size()));
  }
  const Eigen::MatrixXd s1h = SqrtPsd(a.sigma);
  const Eigen::MatrixXd inner = s1h * b.sigma * s1h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double tr_covmean = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() -
                       2.0 * tr_covmean;
  if (!std::isfinite(value)) Fail(ErrorKind::kNonFiniteResult, "Frechet distance is not finite");
  return std::max(value, 0.0);
}

Eigen::VectorXd MockRawFeatures(const TensorF& video) {
  if (video.rank() < 3 || video.dim(0) < 1) {
    Fail(ErrorKind::kShapeMismatch, "expected a [T, H, W(, 1)] video, got " +
                                        ShapeToString(video.shape()));
  }
  const int64_t frames = video.dim(0), h = video.dim(1), w = video.dim(2);
  const int64_t n = video.size() / frames;
  std::vector<double> mean(frames), var(frames), crow(frames), ccol(frames), diff;
  for (int64_t t = 0; t < frames; ++t) {
    const float* f = video.data() + t * n;
    double s = 0.0, sr = 0.0, sc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t pix = i * h * w / n;  // channel-agnostic pixel index
      s += f[i];
      sr += f[i] * ((pix / w) + 0.5) / h;
      sc += f[i] * ((pix % w) + 0.5) / w;
    }
    mean[t] = s / n;
    double ss = 0.0;
    for (int64_t i = 0; i < n; ++i) ss += (f[i] - mean[t]) * (f[i] - mean[t]);
    var[t] = ss / n;
    crow[t] = s > 0.0 ? sr / s : 0.5;
    ccol[t] = s > 0.0 ? sc / s : 0.5;
    if (t > 0) {
      const float* p = f - n;
      double e = 0.0;
      for (int64_t i = 0; i < n; ++i) e += (f[i] - p[i]) * (f[i] - p[i]);
      diff.push_back(e / n);
    }
  }
  auto avg = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
  };
  auto sd = [&](const std::vector<double>& v) {
    const double m = avg(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.empty() ? 0.0 : std::sqrt(s / v.size());
  };
  auto drift = [&](const std::vector<double>& v) {
    return frames > 1 ? (v.back() - v.front()) / (frames - 1) : 0.0;
  };
  Eigen::VectorXd out(kNumMockRawFeatures);
  out << avg(mean), sd(mean), avg(var), sd(var), avg(crow), sd(crow), avg(ccol), sd(ccol),
      avg(diff), drift(mean), drift(var), drift(crow), drift(ccol);
  return out;
}

MockExtractor::MockExtractor(int dim) : dim_(dim) {
  if (dim < 1) Fail(ErrorKind::kBadArgument, "mock extractor dim must be >= 1");
  std::mt19937_64 rng(0xf1dULL + dim);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double{kNumMockRawFeatures}));
  projection_.resize(dim, kNumMockRawFeatures);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < kNumMockRawFeatures; ++c) projection_(r, c) = normal(rng);
  }
}

Eigen::VectorXd MockExtractor::Extract(const TensorF& video) const {
  return projection_ * MockRawFeatures(video);
}

Eigen::MatrixXd ExtractAll(const std::vector<TensorF>& videos, const FeatureExtractor& fx) {
  Eigen::MatrixXd out(static_cast<int64_t>(videos.size()), fx.dim());
  for (size_t i = 0; i < videos.size(); ++i) out.row(i) = fx.Extract(videos[i]).transpose();
  return out;
}

double FvdFromFeatures(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen) {
  return FrechetDistance(FitGaussian(real), FitGaussian(gen));
}

double Fvd(const std::vector<TensorF>& real, const std::vector<TensorF>& gen,
           const FeatureExtractor& fx) {
  if (real.size() < 2 || gen.size() < 2) {
    Fail(ErrorKind::kTooFewSamples, "FVD needs at least 2 videos per set");
  }
  return FvdFromFeatures(ExtractAll(real, fx), ExtractAll(gen, fx));
}

nlohmann::json EvalReport::ToJson() const {
  return {{"split", split},           {"fvd", fvd},
          {"fvd_stderr", fvd_stderr}, {"ssim_mean", ssim_mean},
          {"ssim_stderr", ssim_stderr}, {"n_videos", n_videos},
          {"extractor_id", extractor_id}, {"encoder_id", encoder_id}};
}

EvalReport EvaluateSplit(const std::string& split, const std::vector<TensorF>& real,
                         const std::vector<TensorF>& gen, const FeatureExtractor& fx,
                         const std::string& encoder_id, uint64_t seed, int resamples) {
  if (real.size() != gen.size()) {
    Fail(ErrorKind::kShapeMismatch, "split " + split + ": " + std::to_string(real.size()) +
                                        " real vs " + std::to_string(gen.size()) +
                                        " generated videos");
  }
  if (real.size() < 2) {
    Fail(ErrorKind::kTooFewSamples, "split " + split + " has fewer than 2 videos");
  }
  const int64_t n = static_cast<int64_t>(real.size());
  EvalReport report;
  report.split = split;
  report.n_videos = n;
  report.extractor_id = fx.extractor_id();
  report.encoder_id = encoder_id;

  const Eigen::MatrixXd fr = ExtractAll(real, fx), fg = ExtractAll(gen, fx);
  report.fvd = FvdFromFeatures(fr, fg);
  std::vector<double> ssim(n);
  for (int64_t i = 0; i < n; ++i) ssim[i] = SsimVideo(real[i], gen[i]);
  double sum = 0.0;
  for (double s : ssim) sum += s;
  report.ssim_mean = sum / n;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> pick(0, n - 1);
  std::vector<double> fvds, means;
  Eigen::MatrixXd br(n, fr.cols()), bg(n, fg.cols());
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t j = pick(rng), k = pick(rng);
      br.row(i) = fr.row(j);
      bg.row(i) = fg.row(k);
      s += ssim[j];
    }
    fvds.push_back(FvdFromFeatures(br, bg));
    means.push_back(s / n);
  }
  report.fvd_stderr = StdDev(fvds);
  report.ssim_stderr = StdDev(means);
  return report;
}

std::string FormatEvalTable(const std::vector<EvalReport>& reports) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s | %-20s | %-18s | %5s\n", "Split", "FVD",
                "SSIM", "n");
  out += line;
  out += std::string(60, '-') + "\n";
  for (const EvalReport& r : reports) {
    std::snprintf(line, sizeof(line), "%-8s | %9.3f +- %-7.3f | %7.4f +- %-6.4f | %5lld\n",
                  r.split.c_str(), r.fvd, r.fvd_stderr, r.ssim_mean, r.ssim_stderr,
                  static_cast<long long>(r.n_videos));
    out += line;
  }
  if (!reports.empty()) {
    out += "extractor: " + reports.front().extractor_id +
           ", encoder: " + reports.front().encoder_id + "\n";
  }
  return out;
}

}  // namespace tractdiff
