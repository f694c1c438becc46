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

#include "tractdiff/checkpoint.h"

#include <cstring>
#include <sstream>

#include "tractdiff/raw_tensor_io.h"

namespace tractdiff {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'S', '2', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <typename U>
void PutLE(std::vector<char>* out, U value) {
  for (size_t i = 0; i < sizeof(U); ++i) {
    out->push_back(static_cast<char>((static_cast<uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename U>
U GetLE(const std::vector<char>& in, size_t* pos) {
  if (*pos + sizeof(U) > in.size()) Fail(ErrorKind::kLoadError, "truncated checkpoint header");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(in[*pos + i])) << (8 * i);
  }
  *pos += sizeof(U);
  return static_cast<U>(v);
}

void PutFloats(std::vector<char>* out, const TensorF& t) {
  for (float f : t.values()) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    PutLE(out, bits);
  }
}

void GetFloats(const std::vector<char>& in, size_t* pos, TensorF* t) {
  if (*pos + 4 * static_cast<size_t>(t->size()) > in.size()) {
    Fail(ErrorKind::kLoadError, "truncated checkpoint payload");
  }
  for (float& f : t->values()) {
    const uint32_t bits = GetLE<uint32_t>(in, pos);
    std::memcpy(&f, &bits, 4);
  }
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& path, Trainer& trainer) {
  nn::ParamRefs<float> params = trainer.model().Params();
  json table = json::array();
  for (auto& [name, p] : params) table.push_back({{"name", name}, {"shape", p->value.shape()}});
  std::ostringstream rng_state;
  rng_state << trainer.rng();
  json header{{"config", trainer.config().ToJson()},
              {"step", trainer.step()},
              {"rng", rng_state.str()},
              {"adam_t", trainer.adam().t},
              {"params", table},
              {"rest_frame_shape", trainer.rest_frame().shape()}};
  const std::string text = header.dump();

  std::vector<char> out(kMagic, kMagic + 4);
  PutLE(&out, kVersion);
  PutLE(&out, static_cast<uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (auto& [name, p] : params) PutFloats(&out, p->value);
  for (const TensorF& m : trainer.adam().m) PutFloats(&out, m);
  for (const TensorF& v : trainer.adam().v) PutFloats(&out, v);
  PutFloats(&out, trainer.rest_frame());

  // Write-then-rename keeps an existing checkpoint intact on failure.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  WriteFileBytes(tmp, out);
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<Trainer> LoadCheckpoint(const std::filesystem::path& path,
                                        const std::optional<DenoiserConfig>& expected_model) {
  std::vector<char> in;
  try {
    in = ReadFileBytes(path);
  } catch (const Error& e) {
    Fail(ErrorKind::kLoadError, e.what());
  }
  if (in.size() < 16 || std::memcmp(in.data(), kMagic, 4) != 0) {
    Fail(ErrorKind::kLoadError, path.string() + " is not a checkpoint");
  }
  size_t pos = 4;
  const uint32_t version = GetLE<uint32_t>(in, &pos);
  if (version != kVersion) {
    Fail(ErrorKind::kLoadError, "unsupported checkpoint version " + std::to_string(version));
  }
  const uint64_t header_len = GetLE<uint64_t>(in, &pos);
  if (pos + header_len > in.size()) Fail(ErrorKind::kLoadError, "truncated checkpoint header");
  json header;
  TrainConfig config;
  try {
    header = json::parse(in.begin() + pos, in.begin() + pos + header_len);
    config.UpdateFromJson(header.at("config"));
  } catch (const json::exception& e) {
    Fail(ErrorKind::kLoadError, std::string("corrupt checkpoint header: ") + e.what());
  } catch (const Error& e) {
    Fail(ErrorKind::kLoadError, std::string("corrupt checkpoint header: ") + e.what());
  }
  pos += header_len;
  if (expected_model && !(*expected_model == config.model)) {
    Fail(ErrorKind::kConfigMismatch, "checkpoint model config " + config.model.ToJson().dump() +
                                         " differs from expected " +
                                         expected_model->ToJson().dump());
  }

  auto trainer = std::make_unique<Trainer>(config);
  nn::ParamRefs<float> params = trainer->model().Params();
  try {
    const json& table = header.at("params");
    if (table.size() != params.size()) {
      Fail(ErrorKind::kConfigMismatch, "checkpoint parameter count does not match its config");
    }
    for (size_t k = 0; k < params.size(); ++k) {
      if (table[k].at("name") != params[k].first ||
          table[k].at("shape").get<Shape>() != params[k].second->value.shape()) {
        Fail(ErrorKind::kConfigMismatch, "checkpoint parameter " + params[k].first +
                                             " does not match its config");
      }
    }
    for (auto& [name, p] : params) GetFloats(in, &pos, &p->value);
    for (TensorF& m : trainer->adam().m) GetFloats(in, &pos, &m);
    for (TensorF& v : trainer->adam().v) GetFloats(in, &pos, &v);
    TensorF rest(header.at("rest_frame_shape").get<Shape>());
    if (!rest.shape().empty()) GetFloats(in, &pos, &rest);
    if (pos != in.size()) Fail(ErrorKind::kLoadError, "trailing bytes in checkpoint");
    trainer->set_rest_frame(rest.shape().empty() ? TensorF() : rest);
    trainer->set_step(header.at("step").get<int64_t>());
    trainer->adam().t = header.at("adam_t").get<int64_t>();
    std::istringstream rng_state(header.at("rng").get<std::string>());
    rng_state >> trainer->rng();
    if (!rng_state) Fail(ErrorKind::kLoadError, "corrupt RNG state in checkpoint");
  } catch (const json::exception& e) {
    Fail(ErrorKind::kLoadError, std::string("corrupt checkpoint header: ") + e.what());
  }
  return trainer;
}

}  // namespace tractdiff
