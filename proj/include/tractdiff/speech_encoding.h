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
#include <span>
#include <string>

#include "tractdiff/corpus.h"
#include "tractdiff/embedding_sequence.h"
#include "tractdiff/wav_io.h"

namespace tractdiff {

// A speech representation model. Implementations emit one vector per 20 ms
// of 16 kHz audio; their length may be off by one, EncodeSentence fixes that.
class EncoderPlugin {
 public:
  virtual ~EncoderPlugin() = default;
  virtual std::string encoder_id() const = 0;
  virtual int dim() const = 0;
  // Whether Encode may be called concurrently from several threads.
  virtual bool thread_safe() const { return false; }
  virtual EmbeddingSequence Encode(const Waveform& wave) const = 0;
};

// Log band energies of each 320-sample window (32 linear bands up to 8 kHz),
// projected to `dim` by a fixed matrix. Pure function of the samples.
EmbeddingSequence MockEncode(std::span<const float> samples, int dim);

class MockEncoder : public EncoderPlugin {
 public:
  explicit MockEncoder(int dim = 64) : dim_(dim) {}
  std::string encoder_id() const override { return "mock"; }
  int dim() const override { return dim_; }
  bool thread_safe() const override { return true; }
  EmbeddingSequence Encode(const Waveform& wave) const override;

 private:
  int dim_;
};

// Runs an external program as `<command> <input.wav> <output.s2v>`; the
// program writes an S2V1 tensor [N, D]. This is how pretrained models
// (HuBERT, WavLM, Wav2Vec2) are attached.
class ProcessEncoder : public EncoderPlugin {
 public:
  ProcessEncoder(std::string encoder_id, int dim, std::string command);
  std::string encoder_id() const override { return encoder_id_; }
  int dim() const override { return dim_; }
  EmbeddingSequence Encode(const Waveform& wave) const override;

 private:
  std::string encoder_id_;
  int dim_;
  std::string command_;
};

// Known encoder names: mock, {hubert,wavlm,wav2vec2}-{base,large}. Pretrained
// names need `command`; their dim is 768 (base) or 1024 (large).
std::unique_ptr<EncoderPlugin> MakeEncoder(const std::string& name,
                                           int mock_dim = 64,
                                           const std::string& command = "");
int EncoderDimForName(const std::string& name, int mock_dim = 64);

// Pads (repeating the last row) or trims to exactly `n` rows.
EmbeddingSequence FitToLength(EmbeddingSequence seq, int64_t n);

// Encodes the whole waveform in one pass, then fits to the frame count.
EmbeddingSequence EncodeSentence(const EncoderPlugin& plugin, const Recording& rec);

// Mean over rows of [L, D] -> [D].
TensorF PoolEmbeddings(const TensorF& window);

// Rows round(t_start / 0.02) .. + clip_length - 1.
TensorF SliceForClip(const EmbeddingSequence& seq, double t_start, int clip_length);

std::filesystem::path EmbeddingCachePath(const std::filesystem::path& cache_dir,
                                         const std::string& recording_id,
                                         const std::string& encoder_id);
void SaveEmbeddings(const std::filesystem::path& path, const EmbeddingSequence& seq);
EmbeddingSequence LoadEmbeddings(const std::filesystem::path& path);

}  // namespace tractdiff
