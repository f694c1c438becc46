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

#include "tractdiff/cli_commands.h"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "tractdiff/checkpoint.h"
#include "tractdiff/eval_study.h"
#include "tractdiff/gif_writer.h"
#include "tractdiff/metrics.h"
#include "tractdiff/raw_tensor_io.h"
#include "tractdiff/sampler.h"
#include "tractdiff/speech_encoding.h"
#include "tractdiff/study_server.h"
#include "tractdiff/toy_corpus.h"

namespace tractdiff {

namespace fs = std::filesystem;
using nlohmann::json;

json RunConfig::ToJson() const {
  return json{{"corpus_root", corpus_root},
              {"cache_dir", cache_dir},
              {"checkpoint_dir", checkpoint_dir},
              {"output_dir", output_dir},
              {"resolution", resolution},
              {"clip_length", clip_length},
              {"stride", stride},
              {"n_heldout_speakers", n_heldout_speakers},
              {"n_freeform_per_speaker", n_freeform_per_speaker},
              {"encoder", encoder},
              {"encoder_command", encoder_command},
              {"mock_dim", mock_dim},
              {"pooled", pooled},
              {"base_channels", base_channels},
              {"model", model_overrides},
              {"train", train.ToJson()},
              {"cfg_scale", cfg_scale},
              {"sample_steps", sample_steps},
              {"reimpose_init", reimpose_init},
              {"gif_scale", gif_scale},
              {"seed", seed},
              {"device", device}};
}

void RunConfig::UpdateFromJson(const json& j) {
  if (!j.is_object()) Fail(ErrorKind::kBadArgument, "config must be a JSON object");
  try {
    corpus_root = j.value("corpus_root", corpus_root);
    cache_dir = j.value("cache_dir", cache_dir);
    checkpoint_dir = j.value("checkpoint_dir", checkpoint_dir);
    output_dir = j.value("output_dir", output_dir);
    resolution = j.value("resolution", resolution);
    clip_length = j.value("clip_length", clip_length);
    stride = j.value("stride", stride);
    n_heldout_speakers = j.value("n_heldout_speakers", n_heldout_speakers);
    n_freeform_per_speaker = j.value("n_freeform_per_speaker", n_freeform_per_speaker);
    encoder = j.value("encoder", encoder);
    encoder_command = j.value("encoder_command", encoder_command);
    mock_dim = j.value("mock_dim", mock_dim);
    pooled = j.value("pooled", pooled);
    base_channels = j.value("base_channels", base_channels);
    if (j.contains("model")) model_overrides = j.at("model");
    if (j.contains("train")) train.UpdateFromJson(j.at("train"));
    cfg_scale = j.value("cfg_scale", cfg_scale);
    sample_steps = j.value("sample_steps", sample_steps);
    reimpose_init = j.value("reimpose_init", reimpose_init);
    gif_scale = j.value("gif_scale", gif_scale);
    seed = j.value("seed", seed);
    device = j.value("device", device);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kBadArgument, std::string("bad config value: ") + e.what());
  }
}

void RunConfig::Finalize() {
  if (device != "cpu") Fail(ErrorKind::kBadArgument, "only device 'cpu' is available");
  DenoiserConfig model = DefaultDenoiserConfig(
      resolution, EncoderDimForName(encoder, mock_dim), clip_length, pooled);
  model.base_channels = base_channels;
  if (!model_overrides.empty()) model.UpdateFromJson(model_overrides);
  model.Validate();
  train.model = model;
  train.seed = seed;
  train.encoder = encoder;
  train.mock_dim = mock_dim;
}

RunConfig LoadRunConfig(const fs::path& path) {
  if (!fs::exists(path)) Fail(ErrorKind::kBadArgument, "config file " + path.string() + " not found");
  const std::vector<char> bytes = ReadFileBytes(path);
  RunConfig config;
  try {
    config.UpdateFromJson(json::parse(bytes.begin(), bytes.end()));
  } catch (const json::parse_error& e) {
    Fail(ErrorKind::kBadArgument, path.string() + ": " + e.what());
  }
  return config;
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kBadArgument:
    case ErrorKind::kConfigMismatch:
      return kExitUsage;
    case ErrorKind::kEncoderFailure:
    case ErrorKind::kNonFiniteResult:
    case ErrorKind::kIoError:
      return kExitRuntime;
    default:
      return kExitData;
  }
}

namespace {

void Log(const std::string& msg) { std::cerr << "[tractdiff] " << msg << "\n"; }

void WriteText(const fs::path& path, const std::string& text) {
  WriteFileBytes(path, std::vector<char>(text.begin(), text.end()));
}

json ReadJson(const fs::path& path) {
  const std::vector<char> bytes = ReadFileBytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    Fail(ErrorKind::kLoadError, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- prepare

struct CacheLayout {
  fs::path root;
  fs::path index() const { return root / "prepare.json"; }
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path clips() const { return root / "clips.json"; }
  fs::path frames(const std::string& id) const { return root / "frames" / (id + ".s2v"); }
  fs::path audio(const std::string& id) const { return root / "audio" / (id + ".wav"); }
};

json PrepareFingerprint(const RunConfig& c, const std::vector<CorpusEntry>& entries) {
  std::string listing;
  for (const CorpusEntry& e : entries) {
    listing += e.info.recording_id + "|" + e.info.subject_id + "|" +
               SourceTagName(e.info.source_tag) + "|" +
               std::to_string(fs::file_size(e.audio_path)) + "|" +
               std::to_string(fs::file_size(e.video_path)) + "\n";
  }
  return json{{"resolution", c.resolution},
              {"clip_length", c.clip_length},
              {"stride", c.stride},
              {"encoder", c.encoder},
              {"cond_dim", EncoderDimForName(c.encoder, c.mock_dim)},
              {"n_heldout_speakers", c.n_heldout_speakers},
              {"n_freeform_per_speaker", c.n_freeform_per_speaker},
              {"seed", c.seed},
              {"corpus_digest", HexDigest(std::vector<char>(listing.begin(), listing.end()))}};
}

int CmdPrepare(const RunConfig& c) {
  if (!fs::is_directory(c.corpus_root)) {
    Fail(ErrorKind::kBadArgument, "corpus root '" + c.corpus_root + "' is not a directory");
  }
  const CacheLayout cache{c.cache_dir};
  const std::vector<CorpusEntry> entries = ScanCorpus(c.corpus_root);
  const json fingerprint = PrepareFingerprint(c, entries);
  if (fs::exists(cache.index()) && fs::exists(cache.manifest()) && fs::exists(cache.clips())) {
    const json old = ReadJson(cache.index());
    if (old.value("fingerprint", json()) == fingerprint) {
      std::cout << "cache up to date: " << cache.root.string() << "\n";
      return kExitOk;
    }
  }
  const auto encoder = MakeEncoder(c.encoder, c.mock_dim, c.encoder_command);
  NormalizeOptions norm;
  norm.resolution = c.resolution;

  std::vector<Recording> recordings;
  json recs = json::array();
  for (const CorpusEntry& e : entries) {
    Recording rec = IngestRecording(e.audio_path, e.video_path, e.info.subject_id, norm);
    rec.recording_id = e.info.recording_id;
    rec.source_tag = e.info.source_tag;
    rec.transcript = e.transcript;
    rec = AlignAndTruncate(std::move(rec), c.clip_length);
    const EmbeddingSequence emb = EncodeSentence(*encoder, rec);
    SaveEmbeddings(EmbeddingCachePath(cache.root, rec.recording_id, encoder->encoder_id()), emb);
    WriteRawTensor(cache.frames(rec.recording_id), rec.frames,
                   {{"frame_rate", rec.frame_rate}, {"max_value", 1.0}});
    WriteWav(cache.audio(rec.recording_id), rec.audio);
    const int64_t n_clips = WindowClips(rec, emb, c.clip_length, c.stride).size();
    recs.push_back({{"recording_id", rec.recording_id},
                    {"subject_id", rec.subject_id},
                    {"source_tag", SourceTagName(rec.source_tag)},
                    {"frames", rec.num_frames()},
                    {"clips", n_clips}});
    Log("prepared " + rec.recording_id + ": " + std::to_string(rec.num_frames()) +
        " frames, " + std::to_string(n_clips) + " clips");
    rec.audio.samples.clear();
    recordings.push_back(std::move(rec));
  }
  const SplitManifest manifest =
      MakeSplits(std::span<const Recording>(recordings), c.n_heldout_speakers,
                 c.n_freeform_per_speaker, c.seed);
  manifest.Save(cache.manifest());

  json clips = json::object();
  const std::pair<const char*, const std::vector<std::string>*> splits[] = {
      {"train", &manifest.train},
      {"unseen_speech", &manifest.unseen_speech},
      {"unseen_subject", &manifest.unseen_subject},
      {"unseen_both", &manifest.unseen_both}};
  for (const auto& [name, ids] : splits) {
    json list = json::array();
    for (const std::string& id : *ids) {
      for (const Recording& rec : recordings) {
        if (rec.recording_id != id) continue;
        for (int64_t s = 1; s + c.clip_length <= rec.num_frames(); s += c.stride) {
          list.push_back({{"recording_id", id}, {"start_frame", s}});
        }
      }
    }
    clips[name] = list;
  }
  WriteText(cache.clips(), clips.dump(1) + "\n");
  WriteText(cache.index(), json{{"fingerprint", fingerprint}, {"recordings", recs}}.dump(2) + "\n");
  std::cout << "prepared " << recordings.size() << " recordings; splits: train "
            << manifest.train.size() << ", unseen_speech " << manifest.unseen_speech.size()
            << ", unseen_subject " << manifest.unseen_subject.size() << ", unseen_both "
            << manifest.unseen_both.size() << "\n";
  return kExitOk;
}

// Checks that the cache was prepared with settings compatible with `c`.
json RequireCache(const RunConfig& c) {
  const CacheLayout cache{c.cache_dir};
  if (!fs::exists(cache.index())) {
    Fail(ErrorKind::kBadArgument, "no prepared cache in '" + c.cache_dir + "'; run prepare first");
  }
  const json index = ReadJson(cache.index());
  const json& fp = index.at("fingerprint");
  auto check = [&](const char* key, const json& want) {
    if (fp.at(key) != want) {
      Fail(ErrorKind::kConfigMismatch, std::string("cache was prepared with ") + key + " = " +
                                           fp.at(key).dump() + ", run uses " + want.dump());
    }
  };
  check("resolution", c.resolution);
  check("clip_length", c.clip_length);
  check("encoder", c.encoder);
  check("cond_dim", EncoderDimForName(c.encoder, c.mock_dim));
  return index;
}

Recording LoadCachedRecording(const RunConfig& c, const std::string& id, bool with_audio) {
  const CacheLayout cache{c.cache_dir};
  Recording rec;
  rec.recording_id = id;
  rec.frames = ReadRawTensor(cache.frames(id)).tensor;
  if (with_audio) rec.audio = ReadWav(cache.audio(id));
  return rec;
}

std::vector<TrainingExample> LoadSplitExamples(const RunConfig& c,
                                               const std::vector<std::string>& ids) {
  std::vector<TrainingExample> out;
  for (const std::string& id : ids) {
    const Recording rec = LoadCachedRecording(c, id, false);
    const EmbeddingSequence emb =
        LoadEmbeddings(EmbeddingCachePath(c.cache_dir, id, c.encoder));
    auto clips = WindowClips(rec, emb, c.clip_length, c.stride);
    out.insert(out.end(), std::make_move_iterator(clips.begin()),
               std::make_move_iterator(clips.end()));
  }
  return out;
}

// ------------------------------------------------------------------ train

int CmdTrain(RunConfig c, const std::optional<std::string>& resume) {
  RequireCache(c);
  const SplitManifest manifest = SplitManifest::Load(CacheLayout{c.cache_dir}.manifest());
  const std::vector<TrainingExample> data = LoadSplitExamples(c, manifest.train);
  if (data.empty()) Fail(ErrorKind::kEmptyRecording, "train split has no clips");

  std::unique_ptr<Trainer> trainer;
  const fs::path latest = fs::path(c.checkpoint_dir) / "latest.s2ck";
  if (resume) {
    const fs::path from = resume->empty() ? latest : fs::path(*resume);
    trainer = LoadCheckpoint(from, c.train.model);
    trainer->mutable_config().train_steps = c.train.train_steps;
    Log("resumed from " + from.string() + " at step " + std::to_string(trainer->step()));
  } else {
    trainer = std::make_unique<Trainer>(c.train);
    trainer->set_rest_frame(Trainer::MeanInitFrame(data));
  }
  Log("training on " + std::to_string(data.size()) + " clips, " +
      std::to_string(trainer->model().NumParameters()) + " parameters");

  fs::create_directories(c.checkpoint_dir);
  std::ofstream loss_log(fs::path(c.checkpoint_dir) / "loss.txt",
                         resume ? std::ios::app : std::ios::trunc);
  const int every = std::max(1, c.train.checkpoint_every);
  trainer->Train(data, [&](int64_t step, float loss) {
    loss_log << step << " " << loss << "\n";
    if (step % every == 0) {
      loss_log.flush();
      SaveCheckpoint(latest, *trainer);
      Log("step " + std::to_string(step) + " loss " + std::to_string(loss));
    }
  });
  loss_log.flush();
  SaveCheckpoint(latest, *trainer);
  std::cout << "trained to step " << trainer->step() << "; checkpoint " << latest.string()
            << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- sample

TensorF LoadInitFrame(const fs::path& path, int resolution) {
  TensorF t = ReadRawTensor(path).tensor;
  if (t.rank() == 4 && t.dim(0) >= 1) t = t.Slice0(0);
  if (t.rank() == 2) t = t.Reshaped({t.dim(0), t.dim(1), 1});
  if (t.rank() != 3 || t.dim(2) != 1) {
    Fail(ErrorKind::kShapeMismatch, "init frame must be [H, W(, 1)], got " +
                                        ShapeToString(t.shape()));
  }
  if (t.dim(0) != resolution || t.dim(1) != resolution) {
    t = ResizeFrames(t.Reshaped({1, t.dim(0), t.dim(1), 1}), resolution).Slice0(0);
  }
  return t;
}

GeneratedVideo Generate(Trainer& trainer, const RunConfig& c, const EncoderPlugin& encoder,
                        Waveform wave, TensorF init) {
  GenerationRequest req;
  req.waveform = std::move(wave);
  req.init_frame = std::move(init);
  req.cfg_scale = c.cfg_scale;
  req.n_sample_steps = c.sample_steps;
  req.seed = c.seed;
  req.encoder_id = encoder.encoder_id();
  req.pooled = trainer.config().model.pooled;
  req.reimpose_init = c.reimpose_init;
  return SampleLong(trainer.model(), trainer.schedule(), req, encoder);
}

void WriteGenerated(const fs::path& out, const GeneratedVideo& video,
                    const std::string& ckpt_digest, int gif_scale,
                    const std::optional<std::string>& gif) {
  WriteRawTensor(out, video.frames,
                 {{"frame_rate", kFrameRate},
                  {"max_value", 1.0},
                  {"clip_boundaries", video.clip_boundaries}});
  json sidecar = video.request_echo;
  sidecar["checkpoint_digest"] = ckpt_digest;
  sidecar["frames"] = video.frames.dim(0);
  sidecar["clip_boundaries"] = video.clip_boundaries;
  fs::path side = out;
  side += ".json";
  WriteText(side, sidecar.dump(2) + "\n");
  if (gif) WriteGif(*gif, video.frames, 2, gif_scale);
}

struct SampleArgs {
  std::string checkpoint;
  std::string audio;
  std::string init_frame;
  std::string out;
  std::optional<std::string> gif;
  std::string split;
};

int CmdSample(const RunConfig& c, const SampleArgs& a) {
  const fs::path ckpt = a.checkpoint.empty() ? fs::path(c.checkpoint_dir) / "latest.s2ck"
                                             : fs::path(a.checkpoint);
  std::unique_ptr<Trainer> trainer = LoadCheckpoint(ckpt);
  const DenoiserConfig& model = trainer->config().model;
  const std::string ckpt_digest = HexDigest(ReadFileBytes(ckpt));
  const auto encoder = MakeEncoder(trainer->config().encoder, trainer->config().mock_dim,
                                   c.encoder_command);
  if (encoder->dim() != model.cond_dim) {
    Fail(ErrorKind::kConfigMismatch, "encoder dim " + std::to_string(encoder->dim()) +
                                         " does not match checkpoint cond_dim " +
                                         std::to_string(model.cond_dim));
  }

  if (!a.split.empty()) {
    const SplitManifest manifest = SplitManifest::Load(CacheLayout{c.cache_dir}.manifest());
    const std::vector<std::string>* ids = nullptr;
    if (a.split == "speech") ids = &manifest.unseen_speech;
    if (a.split == "subject") ids = &manifest.unseen_subject;
    if (a.split == "both") ids = &manifest.unseen_both;
    if (a.split == "train") ids = &manifest.train;
    if (ids == nullptr) Fail(ErrorKind::kBadArgument, "unknown split '" + a.split + "'");
    const fs::path dir = a.out.empty() ? fs::path(c.output_dir) / "generated" : fs::path(a.out);
    for (const std::string& id : *ids) {
      Recording rec = LoadCachedRecording(c, id, true);
      const GeneratedVideo video =
          Generate(*trainer, c, *encoder, rec.audio, rec.frames.Slice0(0));
      WriteGenerated(dir / (id + ".s2v"), video, ckpt_digest, c.gif_scale, std::nullopt);
      Log("generated " + id + " (" + std::to_string(video.frames.dim(0)) + " frames)");
    }
    std::cout << "generated " << ids->size() << " videos into " << dir.string() << "\n";
    return kExitOk;
  }

  if (a.audio.empty()) Fail(ErrorKind::kBadArgument, "sample needs --audio or --split");
  TensorF init;
  if (!a.init_frame.empty()) {
    init = LoadInitFrame(a.init_frame, model.resolution);
  } else {
    if (trainer->rest_frame().empty()) {
      Fail(ErrorKind::kBadArgument, "no --init-frame given and the checkpoint has no rest frame");
    }
    Log("warning: no --init-frame given; using the dataset rest frame");
    init = trainer->rest_frame();
  }
  const GeneratedVideo video = Generate(*trainer, c, *encoder, ReadWav(a.audio), init);
  const fs::path out = a.out.empty() ? fs::path(c.output_dir) / "sample.s2v" : fs::path(a.out);
  WriteGenerated(out, video, ckpt_digest, c.gif_scale, a.gif);
  std::cout << "wrote " << video.frames.dim(0) << " frames to " << out.string() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- evaluate

int CmdEvaluate(const RunConfig& c, const std::string& real_dir, const std::string& gen_dir,
                const std::string& manifest_path, const std::string& out_dir) {
  for (const std::string& d : {real_dir, gen_dir}) {
    if (!fs::is_directory(d)) Fail(ErrorKind::kBadArgument, "'" + d + "' is not a directory");
  }
  const SplitManifest manifest = SplitManifest::Load(
      manifest_path.empty() ? CacheLayout{c.cache_dir}.manifest() : fs::path(manifest_path));
  const MockExtractor fx;
  std::vector<EvalReport> reports;
  const std::pair<const char*, const std::vector<std::string>*> splits[] = {
      {"speech", &manifest.unseen_speech},
      {"subject", &manifest.unseen_subject},
      {"both", &manifest.unseen_both}};
  for (const auto& [name, ids] : splits) {
    std::vector<TensorF> real, gen;
    for (const std::string& id : *ids) {
      const fs::path rp = fs::path(real_dir) / (id + ".s2v");
      const fs::path gp = fs::path(gen_dir) / (id + ".s2v");
      if (!fs::exists(rp) || !fs::exists(gp)) continue;
      TensorF r = ReadRawTensor(rp).tensor, g = ReadRawTensor(gp).tensor;
      const int64_t n = std::min(r.dim(0), g.dim(0));
      auto crop = [n](const TensorF& v) {
        Shape s = v.shape();
        s[0] = n;
        return TensorF(s, std::vector<float>(v.storage().begin(),
                                             v.storage().begin() + NumElements(s)));
      };
      real.push_back(crop(r));
      gen.push_back(crop(g));
    }
    if (real.size() < 2) {
      Log(std::string("split ") + name + ": " + std::to_string(real.size()) +
          " paired videos, skipped");
      continue;
    }
    reports.push_back(EvaluateSplit(name, real, gen, fx, c.encoder, c.seed));
  }
  if (reports.empty()) {
    Fail(ErrorKind::kTooFewSamples, "no split has at least 2 paired videos");
  }
  const fs::path out = out_dir.empty() ? fs::path(c.output_dir) / "eval" : fs::path(out_dir);
  json all = json::array();
  for (const EvalReport& r : reports) all.push_back(r.ToJson());
  WriteText(out / "report.json", all.dump(2) + "\n");
  const std::string table = FormatEvalTable(reports);
  WriteText(out / "table.txt", table);
  std::cout << table;
  return kExitOk;
}

// ------------------------------------------------------------------ study

VideosByWord ScanWordDir(const fs::path& root) {
  if (!fs::is_directory(root)) {
    Fail(ErrorKind::kBadArgument, "'" + root.string() + "' is not a directory");
  }
  VideosByWord out;
  for (const auto& word_dir : fs::directory_iterator(root)) {
    if (!word_dir.is_directory()) continue;
    const std::string word = word_dir.path().filename().string();
    for (const auto& f : fs::directory_iterator(word_dir.path())) {
      if (f.is_regular_file() && f.path().extension() != ".json") {
        out[word].push_back(fs::absolute(f.path()).lexically_normal().string());
      }
    }
  }
  return out;
}

fs::path DefaultLogPath(const std::string& study_path) {
  fs::path p(study_path);
  p.replace_extension(".ratings.jsonl");
  return p;
}

}  // namespace

int RunCli(int argc, char** argv) {
  CLI::App app{"tractdiff: speech-driven vocal tract video generation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path, encoder;
  std::optional<uint64_t> seed;
  std::optional<double> cfg_scale;
  std::optional<int> steps, resolution, clip_length;
  bool pooled = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "Seed for every random choice");
  app.add_option("--encoder", encoder, "Speech encoder")
      ->check(CLI::IsMember({"mock", "hubert-base", "hubert-large", "wavlm-base",
                             "wavlm-large", "wav2vec2-base", "wav2vec2-large"}));
  app.add_flag("--pooled", pooled, "Condition on one mean-pooled token per clip");
  app.add_option("--cfg-scale", cfg_scale, "Guidance scale w")->check(CLI::NonNegativeNumber);
  app.add_option("--steps", steps, "Training steps (train) or sampling steps (sample)")
      ->check(CLI::PositiveNumber);
  app.add_option("--resolution", resolution, "Frame size in pixels")->check(CLI::PositiveNumber);
  app.add_option("--clip-length", clip_length, "Frames per clip")->check(CLI::PositiveNumber);

  std::optional<std::string> corpus, cache, checkpoints, output;
  app.add_option("--corpus", corpus, "Corpus root");
  app.add_option("--cache", cache, "Prepared cache directory");
  app.add_option("--checkpoints", checkpoints, "Checkpoint directory");
  app.add_option("--output", output, "Output directory");

  auto* toy = app.add_subcommand("toy", "Write a synthetic corpus");
  std::string toy_out = "corpus";
  int toy_subjects = 20, toy_recordings = 8;
  double toy_duration = 2.0;
  toy->add_option("--out", toy_out, "Corpus root to create");
  toy->add_option("--subjects", toy_subjects)->check(CLI::PositiveNumber);
  toy->add_option("--recordings", toy_recordings, "Recordings per subject")
      ->check(CLI::PositiveNumber);
  toy->add_option("--duration", toy_duration, "Seconds per recording")
      ->check(CLI::PositiveNumber);

  auto* prepare = app.add_subcommand("prepare", "Normalize, encode, window and split a corpus");
  std::optional<int> heldout, freeform, stride;
  prepare->add_option("--heldout-speakers", heldout)->check(CLI::NonNegativeNumber);
  prepare->add_option("--freeform-per-speaker", freeform)->check(CLI::NonNegativeNumber);
  prepare->add_option("--stride", stride, "Window stride in frames")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train the denoiser on the prepared train split");
  std::optional<std::string> resume;
  train->add_option("--resume", resume, "Checkpoint to resume from")->expected(0, 1);

  auto* sample = app.add_subcommand("sample", "Generate video from speech");
  SampleArgs sargs;
  sample->add_option("--checkpoint", sargs.checkpoint);
  sample->add_option("--audio", sargs.audio, "WAVE file");
  sample->add_option("--init-frame", sargs.init_frame, "S2V1 frame [H, W, 1]");
  sample->add_option("--out", sargs.out, "Output .s2v (or directory with --split)");
  sample->add_option("--gif", sargs.gif, "Also write an animated GIF");
  sample->add_option("--split", sargs.split, "Generate every recording of a held-out split")
      ->check(CLI::IsMember({"speech", "subject", "both", "train"}));

  auto* evaluate = app.add_subcommand("evaluate", "FVD / SSIM per held-out split");
  std::string real_dir, gen_dir, manifest_path, eval_out;
  evaluate->add_option("--real", real_dir)->required();
  evaluate->add_option("--generated", gen_dir)->required();
  evaluate->add_option("--manifest", manifest_path);
  evaluate->add_option("--out", eval_out);

  auto* study = app.add_subcommand("study", "Perceptual study tools");
  study->require_subcommand(1);
  auto* study_build = study->add_subcommand("build", "Create a study file");
  std::string real_videos, synth_videos, study_path = "study.json", study_id = "study";
  std::vector<std::string> raters;
  int max_refs = 2;
  study_build->add_option("--real", real_videos, "Directory <word>/<video>")->required();
  study_build->add_option("--synth", synth_videos, "Directory <word>/<video>")->required();
  study_build->add_option("--out", study_path);
  study_build->add_option("--id", study_id);
  study_build->add_option("--rater", raters, "Rater id (repeatable)");
  study_build->add_option("--references", max_refs, "Reference clips per word");
  auto* study_serve = study->add_subcommand("serve", "Run the rating server");
  std::string log_path, host = "127.0.0.1", ui_dir;
  int port = 8080;
  bool per_rater = false;
  study_serve->add_option("--study", study_path);
  study_serve->add_option("--log", log_path, "Ratings log (JSON lines)");
  study_serve->add_option("--host", host);
  study_serve->add_option("--port", port);
  study_serve->add_option("--ui", ui_dir, "Static UI bundle to serve at /");
  study_serve->add_flag("--per-rater", per_rater, "Average F1 over raters");
  auto* study_score = study->add_subcommand("score", "Print per-word F1 and MOS");
  study_score->add_option("--study", study_path);
  study_score->add_option("--log", log_path);
  study_score->add_flag("--per-rater", per_rater, "Average F1 over raters");

  auto* encode_mock = app.add_subcommand("encode-mock");
  encode_mock->group("");  // hidden; exercises the external-encoder path
  std::string em_in, em_out;
  int em_dim = 64;
  encode_mock->add_option("input", em_in)->required();
  encode_mock->add_option("output", em_out)->required();
  encode_mock->add_option("--dim", em_dim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig c = config_path ? LoadRunConfig(*config_path) : RunConfig();
    if (seed) c.seed = *seed;
    if (encoder) c.encoder = *encoder;
    if (pooled) c.pooled = true;
    if (cfg_scale) c.cfg_scale = *cfg_scale;
    if (resolution) c.resolution = *resolution;
    if (clip_length) c.clip_length = *clip_length;
    if (heldout) c.n_heldout_speakers = *heldout;
    if (freeform) c.n_freeform_per_speaker = *freeform;
    if (stride) c.stride = *stride;
    if (corpus) c.corpus_root = *corpus;
    if (cache) c.cache_dir = *cache;
    if (checkpoints) c.checkpoint_dir = *checkpoints;
    if (output) c.output_dir = *output;
    if (steps) {
      if (*train) c.train.train_steps = *steps;
      if (*sample) c.sample_steps = *steps;
    }
    c.Finalize();

    if (*toy) {
      const auto recs = GenerateToyCorpus(toy_subjects, toy_recordings, toy_duration,
                                          c.resolution, c.seed);
      SaveCorpus(toy_out, recs);
      std::cout << "wrote " << recs.size() << " recordings to " << toy_out << "\n";
      return kExitOk;
    }
    if (*prepare) return CmdPrepare(c);
    if (*train) return CmdTrain(c, resume);
    if (*sample) return CmdSample(c, sargs);
    if (*evaluate) return CmdEvaluate(c, real_dir, gen_dir, manifest_path, eval_out);
    if (*encode_mock) {
      const Waveform wave = ReadWav(em_in);
      WriteRawTensor(em_out, MockEncode(wave.samples, em_dim).vectors,
                     {{"encoder_id", "mock"}, {"stride_s", kEmbeddingStrideSeconds}});
      return kExitOk;
    }
    if (*study_build) {
      Study s = BuildStudy(study_id, ScanWordDir(real_videos), ScanWordDir(synth_videos), c.seed,
                           max_refs);
      for (const std::string& r : raters) {
        const RaterAccount& acct = AddRater(&s, r);
        std::cout << "rater " << acct.rater_id << " token " << acct.token << "\n";
      }
      s.Save(study_path);
      std::cout << "study " << s.study_id << ": " << s.items.size() << " items over "
                << s.words.size() << " words -> " << study_path << "\n";
      return kExitOk;
    }
    const F1Aggregation agg = per_rater ? F1Aggregation::kPerRaterMean : F1Aggregation::kPooled;
    const fs::path log = log_path.empty() ? DefaultLogPath(study_path) : fs::path(log_path);
    if (*study_serve) {
      Study s = Study::Load(study_path);
      StudyServer server(std::move(s), log, fs::absolute(study_path).parent_path(), ui_dir, agg);
      if (!server.Bind(host, port)) {
        Fail(ErrorKind::kIoError, "cannot bind " + host + ":" + std::to_string(port));
      }
      std::cout << "serving study on http://" << host << ":" << port << "\n" << std::flush;
      server.ListenAfterBind();
      return kExitOk;
    }
    if (*study_score) {
      const Study s = Study::Load(study_path);
      std::cout << FormatScoresTable(ComputeScores(s, ReadRatingsLog(log), agg));
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace tractdiff
