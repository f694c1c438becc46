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
#include <string>
#include <vector>

#include "json.hpp"
#include "tractdiff/tensor.h"

namespace tractdiff {

// Raw tensor container ("S2V1"). Layout, all integers little-endian:
//   char[4]  magic "S2V1"
//   u32      rank
//   u64      dims[rank]
//   u32      metadata length in bytes (0 allowed)
//   char[]   metadata, a JSON object (frame_rate, encoder_id, ...)
//   f32      payload, row-major
struct RawTensorFile {
  TensorF tensor;
  nlohmann::json meta = nlohmann::json::object();
};

std::vector<char> EncodeRawTensor(const TensorF& tensor,
                                  const nlohmann::json& meta = {});
RawTensorFile DecodeRawTensor(const std::vector<char>& bytes);

void WriteRawTensor(const std::filesystem::path& path, const TensorF& tensor,
                    const nlohmann::json& meta = {});
RawTensorFile ReadRawTensor(const std::filesystem::path& path);

std::vector<char> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    const std::vector<char>& bytes);

// FNV-1a 64 over a byte buffer, rendered as 16 hex digits.
std::string HexDigest(const std::vector<char>& bytes);

}  // namespace tractdiff
