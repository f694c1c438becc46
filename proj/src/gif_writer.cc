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

#include "tractdiff/gif_writer.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "tractdiff/raw_tensor_io.h"

namespace tractdiff {
namespace {

void Put16(std::vector<char>* out, int v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

class BitPacker {
 public:
  void Write(int code, int bits) {
    acc_ |= static_cast<uint32_t>(code) << n_;
    n_ += bits;
    while (n_ >= 8) {
      bytes_.push_back(static_cast<char>(acc_ & 0xff));
      acc_ >>= 8;
      n_ -= 8;
    }
  }
  std::vector<char> Finish() {
    if (n_ > 0) bytes_.push_back(static_cast<char>(acc_ & 0xff));
    return std::move(bytes_);
  }

 private:
  uint32_t acc_ = 0;
  int n_ = 0;
  std::vector<char> bytes_;
};

// LZW stream of literal codes only. A clear code every 254 literals keeps
// the decoder's table, and so the code width, at 9 bits.
std::vector<char> LiteralLzw(const std::vector<uint8_t>& pixels) {
  constexpr int kClear = 256, kEnd = 257, kBits = 9, kRun = 254;
  BitPacker bits;
  for (size_t i = 0; i < pixels.size(); ++i) {
    if (i % kRun == 0) bits.Write(kClear, kBits);
    bits.Write(pixels[i], kBits);
  }
  bits.Write(kEnd, kBits);
  return bits.Finish();
}

}  // namespace

std::vector<char> EncodeGif(const TensorF& video, int delay_centiseconds, int scale) {
  if (video.rank() < 3 || video.dim(0) < 1) {
    Fail(ErrorKind::kShapeMismatch, "GIF export needs a [T, H, W(, 1)] video");
  }
  if (scale < 1) Fail(ErrorKind::kBadArgument, "GIF scale must be >= 1");
  const int64_t frames = video.dim(0), h = video.dim(1), w = video.dim(2);
  const int64_t oh = h * scale, ow = w * scale;
  if (oh > 0xffff || ow > 0xffff) Fail(ErrorKind::kBadArgument, "GIF too large");

  std::vector<char> out;
  const std::string header = "GIF89a";
  out.insert(out.end(), header.begin(), header.end());
  Put16(&out, static_cast<int>(ow));
  Put16(&out, static_cast<int>(oh));
  out.push_back(static_cast<char>(0xf7));  // global table, 8-bit, 256 entries
  out.push_back(0);
  out.push_back(0);
  for (int i = 0; i < 256; ++i) {
    for (int c = 0; c < 3; ++c) out.push_back(static_cast<char>(i));
  }
  // Netscape looping extension.
  const char loop[] = {'\x21', '\xff', '\x0b', 'N', 'E', 'T', 'S', 'C', 'A', 'P', 'E',
                       '2', '.', '0', '\x03', '\x01', '\x00', '\x00', '\x00'};
  out.insert(out.end(), loop, loop + sizeof(loop));

  const int64_t frame_size = video.size() / frames;
  std::vector<uint8_t> pixels(oh * ow);
  for (int64_t t = 0; t < frames; ++t) {
    const float* f = video.data() + t * frame_size;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        const float v = std::clamp(f[(y / scale) * w + x / scale], 0.0f, 1.0f);
        pixels[y * ow + x] = static_cast<uint8_t>(std::lround(v * 255.0f));
      }
    }
    // Graphic control extension: frame delay.
    out.push_back(0x21);
    out.push_back(static_cast<char>(0xf9));
    out.push_back(4);
    out.push_back(0);
    Put16(&out, delay_centiseconds);
    out.push_back(0);
    out.push_back(0);
    // Image descriptor.
    out.push_back(0x2c);
    Put16(&out, 0);
    Put16(&out, 0);
    Put16(&out, static_cast<int>(ow));
    Put16(&out, static_cast<int>(oh));
    out.push_back(0);
    out.push_back(8);  // LZW minimum code size
    const std::vector<char> data = LiteralLzw(pixels);
    for (size_t i = 0; i < data.size(); i += 255) {
      const size_t n = std::min<size_t>(255, data.size() - i);
      out.push_back(static_cast<char>(n));
      out.insert(out.end(), data.begin() + i, data.begin() + i + n);
    }
    out.push_back(0);
  }
  out.push_back(0x3b);
  return out;
}

void WriteGif(const std::filesystem::path& path, const TensorF& video,
              int delay_centiseconds, int scale) {
  WriteFileBytes(path, EncodeGif(video, delay_centiseconds, scale));
}

}  // namespace tractdiff
