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

#include "tractdiff/raw_tensor_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace tractdiff {
namespace {

constexpr char kMagic[4] = {'S', '2', 'V', '1'};

template <typename U>
void PutLe(std::vector<char>* out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (size_t i = 0; i < sizeof(U); ++i) {
    out->push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  template <typename U>
  U GetLe() {
    Need(sizeof(U));
    U value = 0;
    for (size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i]))
               << (8 * i);
    }
    pos_ += sizeof(U);
    return value;
  }

  const char* Take(size_t n) {
    Need(n);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) {
      Fail(ErrorKind::kUnreadableMedia, "raw tensor truncated");
    }
  }

  const std::vector<char>& bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<char> EncodeRawTensor(const TensorF& tensor,
                                  const nlohmann::json& meta) {
  std::vector<char> out(kMagic, kMagic + 4);
  PutLe<uint32_t>(&out, static_cast<uint32_t>(tensor.rank()));
  for (int64_t d : tensor.shape()) PutLe<uint64_t>(&out, static_cast<uint64_t>(d));
  const std::string meta_text =
      meta.is_null() || meta.empty() ? std::string() : meta.dump();
  PutLe<uint32_t>(&out, static_cast<uint32_t>(meta_text.size()));
  out.insert(out.end(), meta_text.begin(), meta_text.end());
  out.reserve(out.size() + tensor.size() * 4);
  for (float v : tensor.values()) PutLe<uint32_t>(&out, std::bit_cast<uint32_t>(v));
  return out;
}

RawTensorFile DecodeRawTensor(const std::vector<char>& bytes) {
  Reader reader(bytes);
  if (std::memcmp(reader.Take(4), kMagic, 4) != 0) {
    Fail(ErrorKind::kUnreadableMedia, "bad magic, expected S2V1");
  }
  const uint32_t rank = reader.GetLe<uint32_t>();
  if (rank > 16) Fail(ErrorKind::kUnreadableMedia, "implausible rank");
  Shape shape(rank);
  for (auto& d : shape) {
    d = static_cast<int64_t>(reader.GetLe<uint64_t>());
    if (d < 0) Fail(ErrorKind::kUnreadableMedia, "negative dimension");
  }
  RawTensorFile file;
  const uint32_t meta_len = reader.GetLe<uint32_t>();
  if (meta_len > 0) {
    const char* p = reader.Take(meta_len);
    try {
      file.meta = nlohmann::json::parse(std::string(p, meta_len));
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kUnreadableMedia, std::string("bad metadata: ") + e.what());
    }
  }
  const int64_t n = NumElements(shape);
  if (reader.remaining() != static_cast<size_t>(n) * 4) {
    Fail(ErrorKind::kUnreadableMedia,
         "payload size does not match dims " + ShapeToString(shape));
  }
  std::vector<float> data(n);
  for (auto& v : data) v = std::bit_cast<float>(reader.GetLe<uint32_t>());
  file.tensor = TensorF(std::move(shape), std::move(data));
  return file;
}

std::vector<char> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIoError, "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::filesystem::path& path,
                    const std::vector<char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIoError, "short write to " + path.string());
}

void WriteRawTensor(const std::filesystem::path& path, const TensorF& tensor,
                    const nlohmann::json& meta) {
  WriteFileBytes(path, EncodeRawTensor(tensor, meta));
}

RawTensorFile ReadRawTensor(const std::filesystem::path& path) {
  std::vector<char> bytes;
  try {
    bytes = ReadFileBytes(path);
  } catch (const Error& e) {
    Fail(ErrorKind::kUnreadableMedia, e.what());
  }
  return DecodeRawTensor(bytes);
}

std::string HexDigest(const std::vector<char>& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace tractdiff
