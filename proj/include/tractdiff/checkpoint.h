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
#include <memory>
#include <optional>

#include "tractdiff/trainer.h"

namespace tractdiff {

// Checkpoint container ("S2CK"):
//   char[4] magic, u32 version, u64 header length, JSON header, then f32
//   payload: parameters in header order, Adam first and second moments,
//   and the rest frame.
// The header carries the training config (model config and schedule
// included), step counter, RNG state and the parameter table, so a
// resumed run continues exactly where it stopped.
void SaveCheckpoint(const std::filesystem::path& path, Trainer& trainer);

// Throws LoadError on a malformed file and ConfigMismatch when
// `expected_model` is given and differs from the stored model config.
std::unique_ptr<Trainer> LoadCheckpoint(
    const std::filesystem::path& path,
    const std::optional<DenoiserConfig>& expected_model = std::nullopt);

}  // namespace tractdiff
