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

#include <array>
#include <cstdint>
#include <vector>

#include "tractdiff/corpus.h"

namespace tractdiff {

inline constexpr int kToyControls = 3;

// Latent articulatory controls in [0, 1]: jaw/tongue aperture, constriction
// location (back to front) and lip aperture.
using ToyControls = std::array<double, kToyControls>;

// Anatomy parameters; a pure function of the subject index.
struct ToySubjectShape {
  double palate_height;
  double palate_curvature;
  double tongue_floor;
  double tongue_width;
  double lip_position;
};

ToySubjectShape ToyShapeForSubject(int subject_index);

// Renders one [size, size] frame (row-major, values in [0, 1]).
std::vector<float> RenderToyFrame(const ToyControls& controls,
                                  const ToySubjectShape& shape, int size);

// Audio whose formant-like spectral peaks track the controls sample by
// sample; `controls` holds one entry per audio sample.
std::vector<float> SynthesizeToyAudio(const std::vector<ToyControls>& controls);

// Smooth control trajectories sampled at `rate` Hz for `n` samples.
std::vector<ToyControls> ToyControlTrajectory(uint64_t seed, int subject,
                                              int recording, int64_t n,
                                              double rate);

// Deterministic synthetic corpus: n_subjects x n_recordings_per_subject
// recordings of duration_s seconds at resolution x resolution, 16 kHz, 50 fps.
// Recording ids are "s<subject>_r<recording>"; all tagged synthetic.
std::vector<Recording> GenerateToyCorpus(int n_subjects,
                                         int n_recordings_per_subject,
                                         double duration_s, int resolution,
                                         uint64_t seed);

}  // namespace tractdiff
