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

#include "tractdiff/toy_corpus.h"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace tractdiff {
namespace {

constexpr double kAir = 0.05;
constexpr double kTissue = 0.85;
constexpr int kPartials = 3;

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Partial {
  double amplitude;
  double frequency_hz;
  double phase;
};

}  // namespace

ToySubjectShape ToyShapeForSubject(int subject_index) {
  const int s = subject_index;
  return {
      .palate_height = 0.20 + 0.04 * (s % 4),
      .palate_curvature = 0.35 + 0.10 * ((s / 4) % 3),
      .tongue_floor = 0.88 - 0.03 * (s % 3),
      .tongue_width = 0.16 + 0.03 * ((s + 1) % 3),
      .lip_position = 0.84 + 0.03 * (s % 2),
  };
}

std::vector<float> RenderToyFrame(const ToyControls& c,
                                  const ToySubjectShape& shape, int size) {
  std::vector<float> frame(static_cast<size_t>(size) * size);
  const double softness = 0.8 / size;
  const double center = 0.25 + 0.45 * c[1];
  const double height = 0.20 + 0.40 * c[0];
  const double lip_gap = 0.03 + 0.12 * c[2];
  for (int row = 0; row < size; ++row) {
    const double y = (row + 0.5) / size;
    for (int col = 0; col < size; ++col) {
      const double x = (col + 0.5) / size;
      const double palate =
          shape.palate_height + shape.palate_curvature * (x - 0.5) * (x - 0.5);
      const double d = (x - center) / shape.tongue_width;
      const double tongue = shape.tongue_floor - height * std::exp(-0.5 * d * d);
      double tissue = std::max(Sigmoid((palate - y) / softness),
                               Sigmoid((y - tongue) / softness));
      if (x > shape.lip_position) {
        const double lips = Sigmoid((std::abs(y - 0.55) - lip_gap) / softness);
        tissue = std::max(tissue, lips * Sigmoid((0.97 - x) / softness));
      }
      frame[static_cast<size_t>(row) * size + col] =
          static_cast<float>(kAir + (kTissue - kAir) * tissue);
    }
  }
  return frame;
}

std::vector<float> SynthesizeToyAudio(const std::vector<ToyControls>& controls) {
  std::vector<float> out(controls.size());
  std::array<double, kToyControls> phase{};
  for (size_t i = 0; i < controls.size(); ++i) {
    const auto& c = controls[i];
    const double f[kToyControls] = {300.0 + 600.0 * c[0], 900.0 + 1500.0 * c[1],
                                    2600.0 + 1000.0 * c[2]};
    const double a[kToyControls] = {0.30 + 0.10 * c[0], 0.20, 0.08 + 0.08 * c[2]};
    double v = 0.0;
    for (int k = 0; k < kToyControls; ++k) {
      phase[k] += 2.0 * std::numbers::pi * f[k] / kSampleRate;
      if (phase[k] > 2.0 * std::numbers::pi) phase[k] -= 2.0 * std::numbers::pi;
      v += a[k] * std::sin(phase[k]);
    }
    out[i] = static_cast<float>(v);
  }
  return out;
}

std::vector<ToyControls> ToyControlTrajectory(uint64_t seed, int subject,
                                              int recording, int64_t n,
                                              double rate) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(subject), static_cast<uint32_t>(recording)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<std::array<Partial, kPartials>, kToyControls> partials;
  for (auto& control : partials) {
    for (int j = 0; j < kPartials; ++j) {
      control[j].amplitude = 0.45 / kPartials * (0.5 + 0.5 * unit(rng));
      control[j].frequency_hz = 0.7 + 2.8 * unit(rng);
      control[j].phase = 2.0 * std::numbers::pi * unit(rng);
    }
  }
  std::vector<ToyControls> out(n);
  for (int64_t i = 0; i < n; ++i) {
    const double t = i / rate;
    for (int k = 0; k < kToyControls; ++k) {
      double v = 0.5;
      for (const auto& p : partials[k]) {
        v += p.amplitude * std::sin(2.0 * std::numbers::pi * p.frequency_hz * t + p.phase);
      }
      out[i][k] = v;
    }
  }
  return out;
}

std::vector<Recording> GenerateToyCorpus(int n_subjects,
                                         int n_recordings_per_subject,
                                         double duration_s, int resolution,
                                         uint64_t seed) {
  if (resolution != 16 && resolution != 32 && resolution != 64) {
    Fail(ErrorKind::kBadArgument, "toy corpus resolution must be 16, 32 or 64");
  }
  if (n_subjects < 1 || n_recordings_per_subject < 1 || duration_s <= 0) {
    Fail(ErrorKind::kBadArgument, "toy corpus needs positive sizes");
  }
  const int64_t n_samples = std::llround(duration_s * kSampleRate);
  const int64_t n_frames = n_samples / kSamplesPerFrame;
  std::vector<Recording> corpus;
  for (int s = 0; s < n_subjects; ++s) {
    const ToySubjectShape shape = ToyShapeForSubject(s);
    char subject_id[32];
    std::snprintf(subject_id, sizeof(subject_id), "s%02d", s);
    for (int r = 0; r < n_recordings_per_subject; ++r) {
      char rec_id[48];
      std::snprintf(rec_id, sizeof(rec_id), "s%02d_r%03d", s, r);
      const auto controls = ToyControlTrajectory(seed, s, r, n_samples, kSampleRate);
      Recording rec;
      rec.recording_id = rec_id;
      rec.subject_id = subject_id;
      rec.source_tag = SourceTag::kSynthetic;
      rec.audio.sample_rate = kSampleRate;
      rec.audio.samples = SynthesizeToyAudio(controls);
      rec.frame_rate = kFrameRate;
      rec.frames = TensorF({n_frames, resolution, resolution, 1});
      for (int64_t f = 0; f < n_frames; ++f) {
        const auto frame =
            RenderToyFrame(controls[f * kSamplesPerFrame], shape, resolution);
        std::copy(frame.begin(), frame.end(), rec.frames.Slab0(f).begin());
      }
      corpus.push_back(std::move(rec));
    }
  }
  return corpus;
}

}  // namespace tractdiff
