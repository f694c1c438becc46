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

#include <filesystem>
#include <vector>

#include "tractdiff/tensor.h"

namespace tractdiff {

// Encodes a [T, H, W(, 1)] video in [0, 1] as a looping 8-bit grayscale GIF,
// each pixel repeated `scale` times in both directions.
std::vector<char> EncodeGif(const TensorF& video, int delay_centiseconds = 2, int scale = 1);
void WriteGif(const std::filesystem::path& path, const TensorF& video,
              int delay_centiseconds = 2, int scale = 1);

}  // namespace tractdiff
