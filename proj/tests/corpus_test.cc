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

#include <filesystem>
#include <set>

#include "doctest.h"
#include "tractdiff/corpus.h"
#include "tractdiff/speech_encoding.h"
#include "tractdiff/toy_corpus.h"

namespace td = tractdiff;
namespace fs = std::filesystem;

TEST_CASE("toy corpus is deterministic and well formed") {
  const auto a = td::GenerateToyCorpus(2, 2, 0.5, 16, 3);
  const auto b = td::GenerateToyCorpus(2, 2, 0.5, 16, 3);
  REQUIRE(a.size() == 4);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frames == b[i].frames);
    CHECK(a[i].audio.samples == b[i].audio.samples);
    CHECK(a[i].frames.shape() == td::Shape{25, 16, 16, 1});
    CHECK(a[i].audio.samples.size() == 8000);
    for (float v : a[i].frames.values()) {
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
  }
  CHECK(a[0].recording_id == "s00_r000");
  CHECK(td::GenerateToyCorpus(2, 2, 0.5, 16, 4)[0].frames != a[0].frames);
}

TEST_CASE("toy subjects have different anatomy") {
  const td::ToyControls c = {0.5, 0.5, 0.5};
  CHECK(td::RenderToyFrame(c, td::ToyShapeForSubject(0), 16) !=
        td::RenderToyFrame(c, td::ToyShapeForSubject(1), 16));
}

TEST_CASE("normalization resamples frame rate and resolution") {
  td::Waveform audio;
  audio.sample_rate = 8000;
  audio.samples.assign(8000, 0.1f);
  td::DecodedVideo video;
  video.frames = td::TensorF({25, 32, 32}, 128.0f);
  video.frame_rate = 25.0;
  video.max_value = 255.0;
  const td::Recording rec = td::NormalizeRecording(audio, video, "s");
  CHECK(rec.audio.sample_rate == 16000);
  CHECK(rec.audio.samples.size() == 16000);
  CHECK(rec.frames.dim(1) == 64);
  CHECK(rec.num_frames() == doctest::Approx(50).epsilon(0.05));
  CHECK(rec.frames[0] == doctest::Approx(128.0 / 255.0).epsilon(1e-4));
}

TEST_CASE("normalization rejects a duration mismatch") {
  td::Waveform audio;
  audio.samples.assign(16000 * 3, 0.0f);
  td::DecodedVideo video;
  video.frames = td::TensorF({50, 8, 8}, 0.0f);
  try {
    td::NormalizeRecording(audio, video, "s");
    FAIL("expected DurationMismatch");
  } catch (const td::Error& e) {
    CHECK(e.kind() == td::ErrorKind::kDurationMismatch);
  }
}

TEST_CASE("alignment truncates to whole frames of the shorter stream") {
  td::Recording rec = td::GenerateToyCorpus(1, 1, 1.0, 16, 0)[0];
  rec.audio.samples.resize(rec.audio.samples.size() - 500);
  rec = td::AlignAndTruncate(rec);
  CHECK(rec.num_frames() == 48);
  CHECK(rec.audio.samples.size() == 48 * 320);

  td::Recording tiny = td::GenerateToyCorpus(1, 1, 0.1, 16, 0)[0];
  CHECK_THROWS_AS(td::AlignAndTruncate(tiny), td::Error);
}

TEST_CASE("windowing reserves frame 0 and pairs rows with frames") {
  const td::Recording rec = td::AlignAndTruncate(td::GenerateToyCorpus(1, 1, 1.0, 16, 0)[0]);
  const td::EmbeddingSequence emb = td::EncodeSentence(td::MockEncoder(4), rec);
  for (int stride : {1, 3, 10}) {
    const auto clips = td::WindowClips(rec, emb, 10, stride);
    CHECK(static_cast<int64_t>(clips.size()) == (rec.num_frames() - 1 - 10) / stride + 1);
    for (const auto& c : clips) {
      CHECK(c.start_frame >= 1);
      CHECK(c.init_frame == rec.Frame(c.start_frame - 1));
      CHECK(c.frames.Slice0(0) == rec.Frame(c.start_frame));
      CHECK(c.embeddings.Slice0(0) == emb.vectors.Slice0(c.start_frame));
      CHECK(c.t_start == doctest::Approx(c.start_frame / 50.0));
    }
  }
  td::EmbeddingSequence short_emb = emb;
  short_emb.vectors = td::TensorF({10, 4});
  CHECK_THROWS_AS(td::WindowClips(rec, short_emb), td::Error);
}

TEST_CASE("splits are disjoint, complete and seed-determined") {
  std::vector<td::RecordingInfo> infos;
  for (int s = 0; s < 6; ++s) {
    for (int r = 0; r < 5; ++r) {
      infos.push_back({"s" + std::to_string(s) + "_r" + std::to_string(r), "s" + std::to_string(s),
                       r < 3 ? td::SourceTag::kFixedScript : td::SourceTag::kFreeForm});
    }
  }
  const td::SplitManifest m = td::MakeSplits(infos, 2, 1, 9);
  CHECK(m == td::MakeSplits(infos, 2, 1, 9));
  std::set<std::string> all;
  size_t total = 0;
  for (const auto* list : {&m.train, &m.unseen_speech, &m.unseen_subject, &m.unseen_both}) {
    all.insert(list->begin(), list->end());
    total += list->size();
  }
  CHECK(total == infos.size());
  CHECK(all.size() == infos.size());
  CHECK(m.unseen_subject.size() == 6);
  CHECK(m.unseen_both.size() == 4);
  CHECK(m.unseen_speech.size() == 4);
  std::set<std::string> train_speakers;
  for (const auto& id : m.train) train_speakers.insert(id.substr(0, 2));
  for (const auto& id : m.unseen_subject) CHECK(train_speakers.count(id.substr(0, 2)) == 0);
  for (const auto& id : m.unseen_speech) CHECK(train_speakers.count(id.substr(0, 2)) == 1);
  CHECK_THROWS_AS(td::MakeSplits(infos, 6, 1, 0), td::Error);
  CHECK(td::SplitManifest::FromJson(m.ToJson()) == m);
}

TEST_CASE("corpus save and load round trip") {
  const fs::path root = fs::temp_directory_path() / "tractdiff_corpus_test";
  fs::remove_all(root);
  const auto recs = td::GenerateToyCorpus(2, 2, 0.5, 16, 0);
  td::SaveCorpus(root, recs);
  const auto entries = td::ScanCorpus(root);
  REQUIRE(entries.size() == 4);
  CHECK(entries[0].info.source_tag == td::SourceTag::kSynthetic);
  td::NormalizeOptions opts;
  opts.resolution = 16;
  const auto back = td::LoadCorpus(root, opts);
  REQUIRE(back.size() == 4);
  CHECK(back[0].recording_id == recs[0].recording_id);
  CHECK(back[0].subject_id == recs[0].subject_id);
  CHECK(back[0].num_frames() == recs[0].num_frames());
  CHECK_THROWS_AS(td::ScanCorpus(root / "nope"), td::Error);
  fs::remove_all(root);
}
