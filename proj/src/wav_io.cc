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

#include "tractdiff/wav_io.h"

#include <bit>
#include <cstring>
#include <string>

#include "tractdiff/error.h"
#include "tractdiff/raw_tensor_io.h"

namespace tractdiff {
namespace {

uint32_t U32(const char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

uint16_t U16(const char* p) {
  return static_cast<uint16_t>(static_cast<unsigned char>(p[0]) |
                               (static_cast<unsigned char>(p[1]) << 8));
}

void Put32(std::vector<char>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void Put16(std::vector<char>* out, uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>(v >> 8));
}

[[noreturn]] void Bad(const std::filesystem::path& path, const std::string& why) {
  Fail(ErrorKind::kUnreadableMedia, path.string() + ": " + why);
}

}  // namespace

Waveform ReadWav(const std::filesystem::path& path) {
  std::vector<char> bytes;
  try {
    bytes = ReadFileBytes(path);
  } catch (const Error& e) {
    Fail(ErrorKind::kUnreadableMedia, e.what());
  }
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    Bad(path, "not a RIFF/WAVE file");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const char* payload = nullptr;
  size_t payload_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = bytes.data() + pos;
    const uint32_t size = U32(id + 4);
    const char* body = id + 8;
    if (pos + 8 + size > bytes.size()) Bad(path, "chunk overruns file");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) Bad(path, "short fmt chunk");
      format = U16(body);
      channels = U16(body + 2);
      rate = U32(body + 4);
      bits = U16(body + 14);
      if (format == 0xFFFE && size >= 26) format = U16(body + 24);  // extensible
    } else if (std::memcmp(id, "data", 4) == 0) {
      payload = body;
      payload_size = size;
    }
    pos += 8 + size + (size & 1);
  }
  if (!payload || channels == 0 || rate == 0) Bad(path, "missing fmt or data chunk");
  const bool is_float = format == 3 && bits == 32;
  const bool is_pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
  if (!is_float && !is_pcm) Bad(path, "unsupported sample format");

  const size_t bytes_per_sample = bits / 8;
  const size_t frames = payload_size / (bytes_per_sample * channels);
  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  wave.samples.resize(frames);
  for (size_t f = 0; f < frames; ++f) {
    double acc = 0;
    for (size_t c = 0; c < channels; ++c) {
      const char* p = payload + (f * channels + c) * bytes_per_sample;
      double v = 0;
      if (is_float) {
        v = std::bit_cast<float>(U32(p));
      } else if (bits == 16) {
        v = static_cast<int16_t>(U16(p)) / 32768.0;
      } else if (bits == 24) {
        const uint32_t raw = static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
                             (static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
                             (static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16);
        const int32_t s = static_cast<int32_t>(raw << 8) >> 8;
        v = s / 8388608.0;
      } else {
        v = static_cast<int32_t>(U32(p)) / 2147483648.0;
      }
      acc += v;
    }
    wave.samples[f] = static_cast<float>(acc / channels);
  }
  return wave;
}

void WriteWav(const std::filesystem::path& path, const Waveform& wave) {
  const uint32_t data_size = static_cast<uint32_t>(wave.samples.size() * 4);
  std::vector<char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  Put32(&out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  Put32(&out, 16);
  Put16(&out, 3);  // IEEE float
  Put16(&out, 1);
  Put32(&out, static_cast<uint32_t>(wave.sample_rate));
  Put32(&out, static_cast<uint32_t>(wave.sample_rate) * 4);
  Put16(&out, 4);
  Put16(&out, 32);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  Put32(&out, data_size);
  for (float s : wave.samples) Put32(&out, std::bit_cast<uint32_t>(s));
  WriteFileBytes(path, out);
}

}  // namespace tractdiff
