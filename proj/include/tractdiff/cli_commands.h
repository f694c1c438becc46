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
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tractdiff/corpus.h"
#include "tractdiff/error.h"
#include "tractdiff/trainer.h"

namespace tractdiff {

// Every setting of a CLI run. Values come from the defaults below, then the
// --config file, then command-line flags.
struct RunConfig {
  std::string corpus_root = "corpus";
  std::string cache_dir = "cache";
  std::string checkpoint_dir = "checkpoints";
  std::string output_dir = "out";

  int resolution = 64;
  int clip_length = kDefaultClipLength;
  int stride = kDefaultClipLength;
  int n_heldout_speakers = 15;
  int n_freeform_per_speaker = 4;

  std::string encoder = "mock";
  std::string encoder_command;
  int mock_dim = 64;
  bool pooled = false;

  int base_channels = 32;
  nlohmann::json model_overrides = nlohmann::json::object();
  TrainConfig train;

  double cfg_scale = 2.0;
  int sample_steps = 50;
  bool reimpose_init = false;
  int gif_scale = 4;

  uint64_t seed = 0;
  std::string device = "cpu";

  nlohmann::json ToJson() const;
  void UpdateFromJson(const nlohmann::json& j);
  // Derives train.model / train.seed / train.encoder from the flat fields.
  void Finalize();
};

RunConfig LoadRunConfig(const std::filesystem::path& path);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

int ExitCodeFor(ErrorKind kind);

// Entry point of the `tractdiff` binary.
int RunCli(int argc, char** argv);

}  // namespace tractdiff
