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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tractdiff/embedding_sequence.h"
#include "tractdiff/tensor.h"
#include "tractdiff/wav_io.h"

namespace tractdiff {

inline constexpr int kSampleRate = 16000;
inline constexpr double kFrameRate = 50.0;
inline constexpr int kSamplesPerFrame = 320;  // 16 kHz / 50 fps
inline constexpr int kDefaultClipLength = 10;

enum class SourceTag { kFixedScript, kFreeForm, kSynthetic };

std::string SourceTagName(SourceTag tag);
SourceTag ParseSourceTag(const std::string& name);

// An aligned (waveform, frame sequence, subject) pair. Frames are grayscale
// [T, H, W, 1] with intensities in [0, 1].
struct Recording {
  std::string recording_id;
  std::string subject_id;
  Waveform audio;
  TensorF frames;
  double frame_rate = kFrameRate;
  std::optional<std::string> transcript;
  SourceTag source_tag = SourceTag::kFixedScript;

  int64_t num_frames() const { return frames.empty() ? 0 : frames.dim(0); }
  int64_t height() const { return frames.dim(1); }
  int64_t width() const { return frames.dim(2); }
  double video_duration() const { return num_frames() / frame_rate; }
  TensorF Frame(int64_t index) const { return frames.Slice0(index); }
};

// One diffusion training unit: clip_length frames, the matching embedding
// rows, and the frame right before the clip.
struct TrainingExample {
  TensorF frames;      // [L, H, W, 1]
  TensorF embeddings;  // [L, D]
  TensorF init_frame;  // [H, W, 1]
  std::string subject_id;
  std::string recording_id;
  int64_t start_frame = 0;
  double t_start = 0.0;
};

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> unseen_speech;
  std::vector<std::string> unseen_subject;
  std::vector<std::string> unseen_both;
  uint64_t seed = 0;

  nlohmann::json ToJson() const;
  static SplitManifest FromJson(const nlohmann::json& j);
  void Save(const std::filesystem::path& path) const;
  static SplitManifest Load(const std::filesystem::path& path);
  bool operator==(const SplitManifest&) const = default;
};

struct NormalizeOptions {
  int resolution = 64;
  double max_duration_mismatch_s = 0.5;
};

// Video as it comes out of a decoder, before normalization.
struct DecodedVideo {
  TensorF frames;  // [T, H, W] or [T, H, W, 1]
  double frame_rate = kFrameRate;
  double max_value = 1.0;  // intensity that maps to 1.0
};

// Pluggable video decoding backend.
class VideoDecoder {
 public:
  virtual ~VideoDecoder() = default;
  virtual DecodedVideo Decode(const std::filesystem::path& path) const = 0;
};

// Reads S2V1 tensors; `frame_rate` and `max_value` come from the metadata.
class RawTensorVideoDecoder : public VideoDecoder {
 public:
  DecodedVideo Decode(const std::filesystem::path& path) const override;
};

std::vector<float> ResampleAudio(std::span<const float> samples, int from_rate,
                                 int to_rate);
// [T, H, W(, 1)] at `from_fps` -> [T', H, W, 1] at `to_fps` by linear
// interpolation between neighbouring frames.
TensorF ResampleFrames(const TensorF& frames, double from_fps, double to_fps);
// Area-weighted spatial resize of every frame to size x size.
TensorF ResizeFrames(const TensorF& frames, int size);

Recording NormalizeRecording(const Waveform& audio, const DecodedVideo& video,
                             const std::string& subject_id,
                             const NormalizeOptions& options = {});

Recording IngestRecording(const std::filesystem::path& audio_path,
                          const std::filesystem::path& video_path,
                          const std::string& subject_id,
                          const NormalizeOptions& options = {},
                          const VideoDecoder& decoder = RawTensorVideoDecoder());

// Truncates both streams to the shorter one, rounded down to whole frames.
Recording AlignAndTruncate(Recording rec, int clip_length = kDefaultClipLength);

std::vector<TrainingExample> WindowClips(const Recording& rec,
                                         const EmbeddingSequence& emb,
                                         int clip_length = kDefaultClipLength,
                                         int stride = kDefaultClipLength);

struct RecordingInfo {
  std::string recording_id;
  std::string subject_id;
  SourceTag source_tag = SourceTag::kFixedScript;
};

SplitManifest MakeSplits(std::span<const RecordingInfo> recordings,
                         int n_heldout_speakers = 15,
                         int n_freeform_per_speaker = 4, uint64_t seed = 0);
SplitManifest MakeSplits(std::span<const Recording> recordings,
                         int n_heldout_speakers = 15,
                         int n_freeform_per_speaker = 4, uint64_t seed = 0);

// Corpus directory layout: <root>/<subject_id>/<recording_id>.{audio,video,meta}
// where .audio is WAVE, .video is S2V1 and .meta is a JSON object holding
// source_tag and transcript.
struct CorpusEntry {
  RecordingInfo info;
  std::filesystem::path audio_path;
  std::filesystem::path video_path;
  std::optional<std::string> transcript;
};

std::vector<CorpusEntry> ScanCorpus(const std::filesystem::path& root);
void SaveCorpus(const std::filesystem::path& root,
                std::span<const Recording> recordings);
std::vector<Recording> LoadCorpus(const std::filesystem::path& root,
                                  const NormalizeOptions& options = {});

}  // namespace tractdiff
