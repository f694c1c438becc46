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

#include "tractdiff/speech_encoding.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <vector>

#include <unistd.h>

#include "tractdiff/raw_tensor_io.h"

namespace tractdiff {
namespace {

constexpr int kBands = 32;
constexpr int kBins = kSamplesPerFrame / 2 + 1;  // 50 Hz spacing up to 8 kHz
constexpr double kEnergyFloor = 1e-6;

struct DftTables {
  std::vector<double> cos_table;
  std::vector<double> sin_table;
  std::vector<double> window;
  DftTables()
      : cos_table(kBins * kSamplesPerFrame),
        sin_table(kBins * kSamplesPerFrame),
        window(kSamplesPerFrame) {
    for (int n = 0; n < kSamplesPerFrame; ++n) {
      window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / kSamplesPerFrame);
    }
    for (int k = 0; k < kBins; ++k) {
      for (int n = 0; n < kSamplesPerFrame; ++n) {
        const double arg = 2.0 * std::numbers::pi * k * n / kSamplesPerFrame;
        cos_table[k * kSamplesPerFrame + n] = std::cos(arg);
        sin_table[k * kSamplesPerFrame + n] = std::sin(arg);
      }
    }
  }
};

const DftTables& Tables() {
  static const DftTables tables;
  return tables;
}

// Fixed projection [dim, kBands]; depends only on dim.
std::vector<double> Projection(int dim) {
  std::mt19937_64 rng(0x5eedf00dull + static_cast<uint64_t>(dim));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(kBands));
  std::vector<double> p(static_cast<size_t>(dim) * kBands);
  for (auto& v : p) v = normal(rng);
  return p;
}

}  // namespace

EmbeddingSequence MockEncode(std::span<const float> samples, int dim) {
  if (dim < 1) Fail(ErrorKind::kBadArgument, "mock encoder dim must be >= 1");
  const auto& tables = Tables();
  const auto projection = Projection(dim);
  const int64_t n = static_cast<int64_t>(samples.size()) / kSamplesPerFrame;
  EmbeddingSequence seq;
  seq.encoder_id = "mock";
  seq.vectors = TensorF({n, dim});
  std::vector<double> windowed(kSamplesPerFrame);
  std::array<double, kBands> bands;
  for (int64_t row = 0; row < n; ++row) {
    for (int i = 0; i < kSamplesPerFrame; ++i) {
      windowed[i] = samples[row * kSamplesPerFrame + i] * tables.window[i];
    }
    bands.fill(0.0);
    for (int k = 0; k < kBins; ++k) {
      double re = 0.0, im = 0.0;
      const double* c = &tables.cos_table[k * kSamplesPerFrame];
      const double* s = &tables.sin_table[k * kSamplesPerFrame];
      for (int i = 0; i < kSamplesPerFrame; ++i) {
        re += windowed[i] * c[i];
        im -= windowed[i] * s[i];
      }
      bands[std::min(kBands - 1, k * kBands / (kBins - 1))] += re * re + im * im;
    }
    for (auto& b : bands) b = std::log(b / kSamplesPerFrame + kEnergyFloor);
    for (int d = 0; d < dim; ++d) {
      double acc = 0.0;
      for (int b = 0; b < kBands; ++b) acc += projection[d * kBands + b] * bands[b];
      seq.vectors.at(row, d) = static_cast<float>(acc);
    }
  }
  return seq;
}

EmbeddingSequence MockEncoder::Encode(const Waveform& wave) const {
  if (wave.sample_rate != kSampleRate) {
    Fail(ErrorKind::kBadArgument, "mock encoder expects 16 kHz audio");
  }
  return MockEncode(wave.samples, dim_);
}

ProcessEncoder::ProcessEncoder(std::string encoder_id, int dim, std::string command)
    : encoder_id_(std::move(encoder_id)), dim_(dim), command_(std::move(command)) {}

EmbeddingSequence ProcessEncoder::Encode(const Waveform& wave) const {
  namespace fs = std::filesystem;
  static std::atomic<uint64_t> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("tractdiff_enc_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
  fs::create_directories(dir);
  const fs::path in = dir / "input.wav";
  const fs::path out = dir / "output.s2v";
  WriteWav(in, wave);
  const std::string cmd = command_ + " '" + in.string() + "' '" + out.string() + "'";
  const int status = std::system(cmd.c_str());
  if (status != 0 || !fs::exists(out)) {
    fs::remove_all(dir);
    Fail(ErrorKind::kEncoderFailure,
         "command '" + command_ + "' exited with status " + std::to_string(status));
  }
  RawTensorFile file = ReadRawTensor(out);
  fs::remove_all(dir);
  if (file.tensor.rank() != 2) {
    Fail(ErrorKind::kEncoderFailure, "encoder output must be [N, D], got " +
                                         ShapeToString(file.tensor.shape()));
  }
  EmbeddingSequence seq;
  seq.vectors = std::move(file.tensor);
  seq.encoder_id = encoder_id_;
  return seq;
}

int EncoderDimForName(const std::string& name, int mock_dim) {
  if (name == "mock") return mock_dim;
  for (const char* family : {"hubert", "wavlm", "wav2vec2"}) {
    if (name == std::string(family) + "-base") return 768;
    if (name == std::string(family) + "-large") return 1024;
  }
  Fail(ErrorKind::kBadArgument, "unknown encoder '" + name + "'");
}

std::unique_ptr<EncoderPlugin> MakeEncoder(const std::string& name, int mock_dim,
                                           const std::string& command) {
  const int dim = EncoderDimForName(name, mock_dim);
  if (name == "mock") return std::make_unique<MockEncoder>(dim);
  if (command.empty()) {
    Fail(ErrorKind::kBadArgument,
         "encoder '" + name + "' needs an encoder command (see tools/hf_encode.py)");
  }
  return std::make_unique<ProcessEncoder>(name, dim, command);
}

EmbeddingSequence FitToLength(EmbeddingSequence seq, int64_t n) {
  const int64_t have = seq.length();
  if (have == n) return seq;
  if (have == 0) {
    Fail(ErrorKind::kEncoderFailure, "encoder produced no vectors to pad from");
  }
  const int64_t d = seq.dim();
  auto& store = seq.vectors.storage();
  if (n < have) {
    store.resize(n * d);
  } else {
    std::vector<float> last(store.end() - d, store.end());
    for (int64_t i = have; i < n; ++i) store.insert(store.end(), last.begin(), last.end());
  }
  seq.vectors = TensorF({n, d}, std::move(store));
  return seq;
}

EmbeddingSequence EncodeSentence(const EncoderPlugin& plugin, const Recording& rec) {
  if (rec.audio.sample_rate != kSampleRate) {
    Fail(ErrorKind::kBadArgument, "recording audio is not 16 kHz");
  }
  EmbeddingSequence seq;
  try {
    seq = plugin.Encode(rec.audio);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kEncoderFailure) throw;
    Fail(ErrorKind::kEncoderFailure, plugin.encoder_id() + ": " + e.what());
  } catch (const std::exception& e) {
    Fail(ErrorKind::kEncoderFailure, plugin.encoder_id() + ": " + e.what());
  }
  if (seq.vectors.rank() != 2 || seq.dim() != plugin.dim()) {
    Fail(ErrorKind::kDimensionMismatch,
         plugin.encoder_id() + " declared D = " + std::to_string(plugin.dim()) +
             " but returned " + ShapeToString(seq.vectors.shape()));
  }
  seq.encoder_id = plugin.encoder_id();
  seq.stride_s = kEmbeddingStrideSeconds;
  seq.t0 = 0.0;
  return FitToLength(std::move(seq), rec.num_frames());
}

TensorF PoolEmbeddings(const TensorF& window) {
  if (window.rank() != 2 || window.dim(0) < 1) {
    Fail(ErrorKind::kEmptyWindow, "pooling needs a non-empty [L, D] window");
  }
  const int64_t rows = window.dim(0), d = window.dim(1);
  std::vector<double> acc(d, 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < d; ++j) acc[j] += window.at(r, j);
  }
  TensorF out({d});
  for (int64_t j = 0; j < d; ++j) out[j] = static_cast<float>(acc[j] / rows);
  return out;
}

TensorF SliceForClip(const EmbeddingSequence& seq, double t_start, int clip_length) {
  const int64_t start = std::llround((t_start - seq.t0) / seq.stride_s);
  if (clip_length < 1 || start < 0 || start + clip_length > seq.length()) {
    Fail(ErrorKind::kOutOfRange,
         "clip at " + std::to_string(t_start) + " s of " +
             std::to_string(clip_length) + " rows exceeds sequence of " +
             std::to_string(seq.length()));
  }
  const int64_t d = seq.dim();
  std::vector<float> rows(seq.vectors.data() + start * d,
                          seq.vectors.data() + (start + clip_length) * d);
  return TensorF({clip_length, d}, std::move(rows));
}

std::filesystem::path EmbeddingCachePath(const std::filesystem::path& cache_dir,
                                         const std::string& recording_id,
                                         const std::string& encoder_id) {
  return cache_dir / "embeddings" / encoder_id / (recording_id + ".emb");
}

void SaveEmbeddings(const std::filesystem::path& path, const EmbeddingSequence& seq) {
  WriteRawTensor(path, seq.vectors,
                 {{"encoder_id", seq.encoder_id}, {"stride_s", seq.stride_s}, {"t0", seq.t0}});
}

EmbeddingSequence LoadEmbeddings(const std::filesystem::path& path) {
  RawTensorFile file = ReadRawTensor(path);
  if (file.tensor.rank() != 2) {
    Fail(ErrorKind::kLoadError, path.string() + ": embeddings must be [N, D]");
  }
  EmbeddingSequence seq;
  seq.vectors = std::move(file.tensor);
  seq.encoder_id = file.meta.value("encoder_id", "");
  seq.stride_s = file.meta.value("stride_s", kEmbeddingStrideSeconds);
  seq.t0 = file.meta.value("t0", 0.0);
  return seq;
}

}  // namespace tractdiff
