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

#include "tractdiff/tensor.h"

namespace tractdiff {

inline constexpr double kEmbeddingStrideSeconds = 0.020;

// Time-stamped speech representation vectors, one row per 20 ms.
struct EmbeddingSequence {
  TensorF vectors;  // [N, D]
  double stride_s = kEmbeddingStrideSeconds;
  double t0 = 0.0;
  std::string encoder_id;

  int64_t length() const { return vectors.empty() ? 0 : vectors.dim(0); }
  int64_t dim() const { return vectors.empty() ? 0 : vectors.dim(1); }
};

}  // namespace tractdiff
