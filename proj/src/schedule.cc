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

#include "tractdiff/schedule.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tractdiff/error.h"

namespace tractdiff {

std::string ScheduleKindName(ScheduleKind kind) {
  return kind == ScheduleKind::kLinear ? "linear" : "cosine";
}

ScheduleKind ParseScheduleKind(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  Fail(ErrorKind::kBadArgument, "unknown schedule kind '" + name + "'");
}

NoiseSchedule ScheduleFromBetas(std::vector<double> betas, ScheduleKind kind) {
  NoiseSchedule s;
  s.kind = kind;
  s.steps = static_cast<int>(betas.size());
  s.betas = std::move(betas);
  s.alphas.resize(s.steps);
  s.alpha_bars.resize(s.steps);
  double prod = 1.0;
  for (int i = 0; i < s.steps; ++i) {
    if (!(s.betas[i] > 0.0 && s.betas[i] < 1.0)) {
      Fail(ErrorKind::kBadArgument, "beta outside (0, 1) at step " + std::to_string(i + 1));
    }
    s.alphas[i] = 1.0 - s.betas[i];
    prod *= s.alphas[i];
    s.alpha_bars[i] = prod;
  }
  return s;
}

NoiseSchedule MakeSchedule(int steps, ScheduleKind kind) {
  if (steps < 1) Fail(ErrorKind::kBadArgument, "schedule needs at least one step");
  std::vector<double> betas(steps);
  if (kind == ScheduleKind::kLinear) {
    constexpr double kStart = 1e-4, kEnd = 2e-2;
    for (int i = 0; i < steps; ++i) {
      betas[i] = steps == 1 ? kStart : kStart + (kEnd - kStart) * i / (steps - 1);
    }
  } else {
    constexpr double kOffset = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / steps + kOffset) / (1.0 + kOffset) * std::numbers::pi / 2);
      return c * c;
    };
    for (int i = 0; i < steps; ++i) {
      betas[i] = std::min(1.0 - f(i + 1) / f(i), 0.999);
    }
  }
  return ScheduleFromBetas(std::move(betas), kind);
}

RespacedSchedule Respace(const NoiseSchedule& base, int n_steps) {
  if (n_steps < 1 || n_steps > base.steps) {
    Fail(ErrorKind::kBadArgument, "sampling steps must be in [1, " +
                                      std::to_string(base.steps) + "]");
  }
  RespacedSchedule out;
  for (int i = 1; i <= n_steps; ++i) {
    const int t = static_cast<int>(std::lround(static_cast<double>(i) * base.steps / n_steps));
    out.timesteps.push_back(std::clamp(t, 1, base.steps));
  }
  std::vector<double> betas;
  double prev = 1.0;
  for (int t : out.timesteps) {
    betas.push_back(1.0 - base.alpha_bar(t) / prev);
    prev = base.alpha_bar(t);
  }
  out.schedule = ScheduleFromBetas(std::move(betas), base.kind);
  return out;
}

}  // namespace tractdiff
