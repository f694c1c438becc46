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

#include "tractdiff/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "tractdiff/raw_tensor_io.h"

namespace tractdiff {

namespace fs = std::filesystem;

std::string SourceTagName(SourceTag tag) {
  switch (tag) {
    case SourceTag::kFixedScript: return "fixed_script";
    case SourceTag::kFreeForm: return "free_form";
    case SourceTag::kSynthetic: return "synthetic";
  }
  return "fixed_script";
}

SourceTag ParseSourceTag(const std::string& name) {
  if (name == "fixed_script") return SourceTag::kFixedScript;
  if (name == "free_form") return SourceTag::kFreeForm;
  if (name == "synthetic") return SourceTag::kSynthetic;
  Fail(ErrorKind::kBadArgument, "unknown source_tag '" + name + "'");
}

nlohmann::json SplitManifest::ToJson() const {
  return {{"seed", seed},
          {"train", train},
          {"unseen_speech", unseen_speech},
          {"unseen_subject", unseen_subject},
          {"unseen_both", unseen_both}};
}

SplitManifest SplitManifest::FromJson(const nlohmann::json& j) {
  SplitManifest m;
  try {
    m.seed = j.at("seed").get<uint64_t>();
    m.train = j.at("train").get<std::vector<std::string>>();
    m.unseen_speech = j.at("unseen_speech").get<std::vector<std::string>>();
    m.unseen_subject = j.at("unseen_subject").get<std::vector<std::string>>();
    m.unseen_both = j.at("unseen_both").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kLoadError, std::string("malformed split manifest: ") + e.what());
  }
  return m;
}

void SplitManifest::Save(const fs::path& path) const {
  const std::string text = ToJson().dump(2) + "\n";
  WriteFileBytes(path, std::vector<char>(text.begin(), text.end()));
}

SplitManifest SplitManifest::Load(const fs::path& path) {
  const auto bytes = ReadFileBytes(path);
  try {
    return FromJson(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorKind::kLoadError, path.string() + ": " + e.what());
  }
}

DecodedVideo RawTensorVideoDecoder::Decode(const fs::path& path) const {
  RawTensorFile file = ReadRawTensor(path);
  DecodedVideo video;
  const int rank = file.tensor.rank();
  if (rank != 3 && !(rank == 4 && file.tensor.dim(3) == 1)) {
    Fail(ErrorKind::kUnreadableMedia,
         path.string() + ": expected [T, H, W] or [T, H, W, 1] frames, got " +
             ShapeToString(file.tensor.shape()));
  }
  video.frames = std::move(file.tensor);
  video.frame_rate = file.meta.value("frame_rate", kFrameRate);
  video.max_value = file.meta.value("max_value", 1.0);
  if (video.frame_rate <= 0 || video.max_value <= 0) {
    Fail(ErrorKind::kUnreadableMedia, path.string() + ": bad frame_rate/max_value");
  }
  return video;
}

std::vector<float> ResampleAudio(std::span<const float> samples, int from_rate,
                                 int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) {
    Fail(ErrorKind::kBadArgument, "sample rates must be positive");
  }
  if (from_rate == to_rate) return {samples.begin(), samples.end()};
  const int64_t n_in = static_cast<int64_t>(samples.size());
  const int64_t n_out = n_in * to_rate / from_rate;
  // Hann-windowed sinc low-pass at the lower Nyquist frequency.
  const double cutoff = std::min(1.0, static_cast<double>(to_rate) / from_rate);
  constexpr int kZeroCrossings = 16;
  const double half_width = kZeroCrossings / cutoff;
  std::vector<float> out(n_out);
  for (int64_t i = 0; i < n_out; ++i) {
    const double center = static_cast<double>(i) * from_rate / to_rate;
    const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(center - half_width)));
    const int64_t hi = std::min<int64_t>(n_in - 1, static_cast<int64_t>(std::floor(center + half_width)));
    double acc = 0.0;
    for (int64_t j = lo; j <= hi; ++j) {
      const double x = j - center;
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * x / half_width);
      acc += samples[j] * cutoff * sinc * window;
    }
    out[i] = static_cast<float>(acc);
  }
  return out;
}

namespace {

TensorF AsFrames4(const TensorF& frames) {
  if (frames.rank() == 4) return frames;
  return frames.Reshaped({frames.dim(0), frames.dim(1), frames.dim(2), 1});
}

// Weights of source cells covering destination cell `i` when mapping
// n_in -> n_out cells on [0, 1].
std::vector<std::pair<int, double>> AreaWeights(int i, int n_in, int n_out) {
  std::vector<std::pair<int, double>> w;
  const double lo = static_cast<double>(i) * n_in / n_out;
  const double hi = static_cast<double>(i + 1) * n_in / n_out;
  for (int j = static_cast<int>(std::floor(lo)); j < std::min<int>(n_in, static_cast<int>(std::ceil(hi))); ++j) {
    const double overlap = std::min<double>(hi, j + 1) - std::max<double>(lo, j);
    if (overlap > 0) w.emplace_back(j, overlap / (hi - lo));
  }
  return w;
}

}  // namespace

TensorF ResampleFrames(const TensorF& frames, double from_fps, double to_fps) {
  TensorF in = AsFrames4(frames);
  if (from_fps == to_fps) return in;
  const int64_t t_in = in.dim(0);
  const int64_t n_out =
      static_cast<int64_t>(std::floor(t_in * to_fps / from_fps + 1e-9));
  const int64_t plane = in.size() / std::max<int64_t>(t_in, 1);
  TensorF out({n_out, in.dim(1), in.dim(2), 1});
  for (int64_t j = 0; j < n_out; ++j) {
    const double pos = j * from_fps / to_fps;
    const int64_t a = std::min<int64_t>(static_cast<int64_t>(std::floor(pos)), t_in - 1);
    const int64_t b = std::min<int64_t>(a + 1, t_in - 1);
    const double frac = pos - a;
    auto dst = out.Slab0(j);
    auto fa = in.Slab0(a);
    auto fb = in.Slab0(b);
    for (int64_t p = 0; p < plane; ++p) {
      dst[p] = static_cast<float>((1.0 - frac) * fa[p] + frac * fb[p]);
    }
  }
  return out;
}

TensorF ResizeFrames(const TensorF& frames, int size) {
  TensorF in = AsFrames4(frames);
  const int h_in = static_cast<int>(in.dim(1));
  const int w_in = static_cast<int>(in.dim(2));
  if (h_in == size && w_in == size) return in;
  const int64_t t = in.dim(0);
  TensorF out({t, size, size, 1});
  std::vector<std::vector<std::pair<int, double>>> wy(size), wx(size);
  for (int i = 0; i < size; ++i) {
    wy[i] = AreaWeights(i, h_in, size);
    wx[i] = AreaWeights(i, w_in, size);
  }
  for (int64_t f = 0; f < t; ++f) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        double acc = 0.0;
        for (auto [sy, ay] : wy[y]) {
          for (auto [sx, ax] : wx[x]) acc += ay * ax * in.at(f, sy, sx, 0);
        }
        out.at(f, y, x, 0) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Recording NormalizeRecording(const Waveform& audio, const DecodedVideo& video,
                             const std::string& subject_id,
                             const NormalizeOptions& options) {
  if (options.resolution <= 0) {
    Fail(ErrorKind::kBadArgument, "resolution must be positive");
  }
  const double audio_s = audio.duration();
  const double video_s = video.frames.dim(0) / video.frame_rate;
  if (std::abs(audio_s - video_s) > options.max_duration_mismatch_s) {
    Fail(ErrorKind::kDurationMismatch,
         "audio " + std::to_string(audio_s) + " s vs video " +
             std::to_string(video_s) + " s");
  }
  Recording rec;
  rec.subject_id = subject_id;
  rec.audio.sample_rate = kSampleRate;
  rec.audio.samples = ResampleAudio(audio.samples, audio.sample_rate, kSampleRate);

  TensorF frames = AsFrames4(video.frames);
  const float inv = static_cast<float>(1.0 / video.max_value);
  for (float& v : frames.values()) {
    v = std::clamp(video.max_value == 1.0 ? v : v * inv, 0.0f, 1.0f);
  }
  frames = ResizeFrames(frames, options.resolution);
  rec.frames = ResampleFrames(frames, video.frame_rate, kFrameRate);
  rec.frame_rate = kFrameRate;
  return rec;
}

Recording IngestRecording(const fs::path& audio_path, const fs::path& video_path,
                          const std::string& subject_id,
                          const NormalizeOptions& options,
                          const VideoDecoder& decoder) {
  const Waveform audio = ReadWav(audio_path);
  const DecodedVideo video = decoder.Decode(video_path);
  Recording rec = NormalizeRecording(audio, video, subject_id, options);
  rec.recording_id = audio_path.stem().string();
  return rec;
}

Recording AlignAndTruncate(Recording rec, int clip_length) {
  if (rec.audio.sample_rate != kSampleRate || rec.frame_rate != kFrameRate) {
    Fail(ErrorKind::kBadArgument, "recording is not normalized to 16 kHz / 50 fps");
  }
  const int64_t audio_frames =
      static_cast<int64_t>(rec.audio.samples.size()) / kSamplesPerFrame;
  const int64_t n_frames = std::min(rec.num_frames(), audio_frames);
  if (n_frames < clip_length) {
    Fail(ErrorKind::kEmptyRecording,
         rec.recording_id + ": " + std::to_string(n_frames) +
             " aligned frames, fewer than one clip of " +
             std::to_string(clip_length));
  }
  rec.audio.samples.resize(n_frames * kSamplesPerFrame);
  if (n_frames != rec.num_frames()) {
    Shape shape = rec.frames.shape();
    shape[0] = n_frames;
    auto& store = rec.frames.storage();
    store.resize(NumElements(shape));
    rec.frames = TensorF(shape, std::move(store));
  }
  return rec;
}

std::vector<TrainingExample> WindowClips(const Recording& rec,
                                         const EmbeddingSequence& emb,
                                         int clip_length, int stride) {
  if (clip_length < 1 || stride < 1) {
    Fail(ErrorKind::kBadArgument, "clip_length and stride must be >= 1");
  }
  const int64_t t = rec.num_frames();
  if (emb.length() != t) {
    Fail(ErrorKind::kAlignmentGap, rec.recording_id + ": " +
                                       std::to_string(emb.length()) +
                                       " embeddings for " + std::to_string(t) +
                                       " frames");
  }
  std::vector<TrainingExample> clips;
  if (t - 1 < clip_length) return clips;
  const int64_t n_clips = (t - 1 - clip_length) / stride + 1;
  const int64_t d = emb.dim();
  const int64_t plane = rec.height() * rec.width();
  clips.reserve(n_clips);
  for (int64_t k = 0; k < n_clips; ++k) {
    const int64_t start = 1 + k * stride;
    TrainingExample ex;
    ex.subject_id = rec.subject_id;
    ex.recording_id = rec.recording_id;
    ex.start_frame = start;
    ex.t_start = start / kFrameRate;
    ex.init_frame = rec.Frame(start - 1);
    std::vector<float> frames(rec.frames.data() + start * plane,
                              rec.frames.data() + (start + clip_length) * plane);
    ex.frames = TensorF({clip_length, rec.height(), rec.width(), 1}, std::move(frames));
    std::vector<float> rows(emb.vectors.data() + start * d,
                            emb.vectors.data() + (start + clip_length) * d);
    ex.embeddings = TensorF({clip_length, d}, std::move(rows));
    clips.push_back(std::move(ex));
  }
  return clips;
}

SplitManifest MakeSplits(std::span<const RecordingInfo> recordings,
                         int n_heldout_speakers, int n_freeform_per_speaker,
                         uint64_t seed) {
  if (n_heldout_speakers < 0 || n_freeform_per_speaker < 0) {
    Fail(ErrorKind::kBadArgument, "split sizes must be non-negative");
  }
  std::map<std::string, std::vector<const RecordingInfo*>> by_speaker;
  for (const auto& r : recordings) by_speaker[r.subject_id].push_back(&r);
  if (static_cast<int>(by_speaker.size()) <= n_heldout_speakers) {
    Fail(ErrorKind::kInsufficientSpeakers,
         std::to_string(by_speaker.size()) + " speakers cannot hold out " +
             std::to_string(n_heldout_speakers) + " and still train");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> speakers;
  for (const auto& [speaker, recs] : by_speaker) speakers.push_back(speaker);
  std::shuffle(speakers.begin(), speakers.end(), rng);
  const std::set<std::string> heldout(speakers.begin(),
                                      speakers.begin() + n_heldout_speakers);

  SplitManifest m;
  m.seed = seed;
  for (auto& [speaker, recs] : by_speaker) {
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) {
      return a->recording_id < b->recording_id;
    });
    if (heldout.count(speaker)) {
      for (const auto* r : recs) {
        (r->source_tag == SourceTag::kFixedScript ? m.unseen_subject : m.unseen_both)
            .push_back(r->recording_id);
      }
      continue;
    }
    std::vector<const RecordingInfo*> candidates;
    for (const auto* r : recs) {
      if (r->source_tag != SourceTag::kFixedScript) candidates.push_back(r);
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    const size_t take = std::min<size_t>(candidates.size(), n_freeform_per_speaker);
    std::set<const RecordingInfo*> moved(candidates.begin(), candidates.begin() + take);
    for (const auto* r : recs) {
      (moved.count(r) ? m.unseen_speech : m.train).push_back(r->recording_id);
    }
  }
  for (auto* list : {&m.train, &m.unseen_speech, &m.unseen_subject, &m.unseen_both}) {
    std::sort(list->begin(), list->end());
  }
  return m;
}

SplitManifest MakeSplits(std::span<const Recording> recordings,
                         int n_heldout_speakers, int n_freeform_per_speaker,
                         uint64_t seed) {
  std::vector<RecordingInfo> infos;
  infos.reserve(recordings.size());
  for (const auto& r : recordings) {
    infos.push_back({r.recording_id, r.subject_id, r.source_tag});
  }
  return MakeSplits(infos, n_heldout_speakers, n_freeform_per_speaker, seed);
}

std::vector<CorpusEntry> ScanCorpus(const fs::path& root) {
  if (!fs::is_directory(root)) {
    Fail(ErrorKind::kIoError, "corpus root " + root.string() + " is not a directory");
  }
  std::vector<CorpusEntry> entries;
  std::set<std::string> seen;
  std::vector<fs::path> subjects;
  for (const auto& d : fs::directory_iterator(root)) {
    if (d.is_directory()) subjects.push_back(d.path());
  }
  std::sort(subjects.begin(), subjects.end());
  for (const auto& subject_dir : subjects) {
    std::vector<fs::path> audio_files;
    for (const auto& f : fs::directory_iterator(subject_dir)) {
      if (f.path().extension() == ".audio") audio_files.push_back(f.path());
    }
    std::sort(audio_files.begin(), audio_files.end());
    for (const auto& audio : audio_files) {
      CorpusEntry e;
      e.info.subject_id = subject_dir.filename().string();
      e.info.recording_id = audio.stem().string();
      e.audio_path = audio;
      e.video_path = fs::path(audio).replace_extension(".video");
      if (!fs::exists(e.video_path)) {
        Fail(ErrorKind::kUnreadableMedia, "missing video for " + audio.string());
      }
      if (!seen.insert(e.info.recording_id).second) {
        Fail(ErrorKind::kBadArgument, "duplicate recording id " + e.info.recording_id);
      }
      const fs::path meta_path = fs::path(audio).replace_extension(".meta");
      if (fs::exists(meta_path)) {
        const auto bytes = ReadFileBytes(meta_path);
        try {
          const auto meta = nlohmann::json::parse(bytes.begin(), bytes.end());
          e.info.source_tag = ParseSourceTag(meta.value("source_tag", "fixed_script"));
          if (meta.contains("transcript") && meta["transcript"].is_string()) {
            e.transcript = meta["transcript"].get<std::string>();
          }
        } catch (const nlohmann::json::exception& ex) {
          Fail(ErrorKind::kUnreadableMedia, meta_path.string() + ": " + ex.what());
        }
      }
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

void SaveCorpus(const fs::path& root, std::span<const Recording> recordings) {
  for (const auto& rec : recordings) {
    const fs::path dir = root / rec.subject_id;
    fs::create_directories(dir);
    WriteWav(dir / (rec.recording_id + ".audio"), rec.audio);
    WriteRawTensor(dir / (rec.recording_id + ".video"), rec.frames,
                   {{"frame_rate", rec.frame_rate}, {"max_value", 1.0}});
    nlohmann::json meta = {{"source_tag", SourceTagName(rec.source_tag)}};
    meta["transcript"] = rec.transcript ? nlohmann::json(*rec.transcript) : nlohmann::json();
    const std::string text = meta.dump(2) + "\n";
    WriteFileBytes(dir / (rec.recording_id + ".meta"),
                   std::vector<char>(text.begin(), text.end()));
  }
}

std::vector<Recording> LoadCorpus(const fs::path& root,
                                  const NormalizeOptions& options) {
  std::vector<Recording> out;
  for (const auto& e : ScanCorpus(root)) {
    Recording rec = IngestRecording(e.audio_path, e.video_path, e.info.subject_id, options);
    rec.recording_id = e.info.recording_id;
    rec.source_tag = e.info.source_tag;
    rec.transcript = e.transcript;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace tractdiff
