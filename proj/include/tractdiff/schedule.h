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

#include <string>
#include <vector>

namespace tractdiff {

enum class ScheduleKind { kLinear, kCosine };

std::string ScheduleKindName(ScheduleKind kind);
ScheduleKind ParseScheduleKind(const std::string& name);

// Per-timestep noise coefficients. Timesteps are 1-based: t in [1, steps].
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::kCosine;
  int steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  double beta(int t) const { return betas[t - 1]; }
  double alpha(int t) const { return alphas[t - 1]; }
  double alpha_bar(int t) const { return alpha_bars[t - 1]; }
  // alpha_bar_{t-1}, with alpha_bar_0 = 1.
  double alpha_bar_prev(int t) const { return t > 1 ? alpha_bars[t - 2] : 1.0; }
  // Posterior variance of q(x_{t-1} | x_t, x_0).
  double posterior_variance(int t) const {
    return beta(t) * (1.0 - alpha_bar_prev(t)) / (1.0 - alpha_bar(t));
  }
};

// Linear: beta from 1e-4 to 2e-2. Cosine: squared-cosine alpha_bar with
// offset s = 0.008 and betas clipped at 0.999.
NoiseSchedule MakeSchedule(int steps, ScheduleKind kind);

// Builds a schedule directly from betas.
NoiseSchedule ScheduleFromBetas(std::vector<double> betas, ScheduleKind kind);

// A shortened schedule for sampling: step i (1-based) of `schedule` stands
// for timestep `timesteps[i - 1]` of the training schedule.
struct RespacedSchedule {
  NoiseSchedule schedule;
  std::vector<int> timesteps;
};

// Evenly strided subsequence t_i = round(i * T / n), i = 1..n, with betas
// recomputed so cumulative products match the original at those steps.
RespacedSchedule Respace(const NoiseSchedule& base, int n_steps);

}  // namespace tractdiff
