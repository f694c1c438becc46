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

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "tractdiff/speech_encoding.h"
#include "tractdiff/toy_corpus.h"

namespace td = tractdiff;
namespace fs = std::filesystem;

TEST_CASE("mock encoder emits one row per 20 ms and is deterministic") {
  std::vector<float> s(16000);
  for (size_t i = 0; i < s.size(); ++i) s[i] = std::sin(0.3f * i);
  const td::EmbeddingSequence a = td::MockEncode(s, 32);
  CHECK(a.length() == 50);
  CHECK(a.dim() == 32);
  CHECK(a.stride_s == doctest::Approx(0.02));
  CHECK(td::MockEncode(s, 32).vectors == a.vectors);
}

TEST_CASE("mock encoder separates different spectra") {
  std::vector<float> lo(3200), hi(3200);
  for (size_t i = 0; i < lo.size(); ++i) {
    lo[i] = std::sin(0.05f * i);
    hi[i] = std::sin(2.5f * i);
  }
  CHECK(td::MockEncode(lo, 16).vectors != td::MockEncode(hi, 16).vectors);
}

TEST_CASE("fit to length pads with the last row and trims") {
  td::EmbeddingSequence seq;
  seq.vectors = td::TensorF({3, 2}, {1, 2, 3, 4, 5, 6});
  const auto longer = td::FitToLength(seq, 5);
  CHECK(longer.length() == 5);
  CHECK(longer.vectors.at(4, 1) == 6.0f);
  CHECK(td::FitToLength(seq, 2).vectors == td::TensorF({2, 2}, {1, 2, 3, 4}));
}

TEST_CASE("encode sentence matches the frame count") {
  td::Recording rec = td::AlignAndTruncate(td::GenerateToyCorpus(1, 1, 1.0, 16, 0)[0]);
  const auto emb = td::EncodeSentence(td::MockEncoder(8), rec);
  CHECK(emb.length() == rec.num_frames());
  CHECK(emb.encoder_id == "mock");
}

TEST_CASE("pooling and clip slicing") {
  td::EmbeddingSequence seq;
  seq.vectors = td::TensorF({20, 2});
  for (int i = 0; i < 20; ++i) {
    seq.vectors.at(i, 0) = static_cast<float>(i);
    seq.vectors.at(i, 1) = 1.0f;
  }
  const td::TensorF w = td::SliceForClip(seq, 0.1, 10);
  CHECK(w.shape() == td::Shape{10, 2});
  CHECK(w.at(0, 0) == 5.0f);
  const td::TensorF pooled = td::PoolEmbeddings(w);
  CHECK(pooled.shape() == td::Shape{2});
  CHECK(pooled[0] == doctest::Approx(9.5));
  CHECK(pooled[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(td::SliceForClip(seq, 0.3, 10), td::Error);
}

TEST_CASE("embedding cache round trip") {
  const fs::path dir = fs::temp_directory_path() / "tractdiff_emb_test";
  fs::remove_all(dir);
  td::EmbeddingSequence seq;
  seq.vectors = td::TensorF({4, 3}, 0.25f);
  seq.encoder_id = "mock";
  const fs::path path = td::EmbeddingCachePath(dir, "rec1", "mock");
  td::SaveEmbeddings(path, seq);
  const auto back = td::LoadEmbeddings(path);
  CHECK(back.vectors == seq.vectors);
  CHECK(back.encoder_id == "mock");
  fs::remove_all(dir);
}

TEST_CASE("encoder factory") {
  CHECK(td::EncoderDimForName("mock", 12) == 12);
  CHECK(td::EncoderDimForName("hubert-base") == 768);
  CHECK(td::EncoderDimForName("wavlm-large") == 1024);
  CHECK(td::MakeEncoder("mock", 5)->dim() == 5);
  CHECK_THROWS_AS(td::MakeEncoder("hubert-base"), td::Error);
  CHECK_THROWS_AS(td::MakeEncoder("nonsense"), td::Error);
}

TEST_CASE("process encoder reports plugin failures") {
  td::ProcessEncoder enc("hubert-base", 768, "false");
  td::Waveform w;
  w.samples.assign(3200, 0.0f);
  try {
    enc.Encode(w);
    FAIL("expected EncoderFailure");
  } catch (const td::Error& e) {
    CHECK(e.kind() == td::ErrorKind::kEncoderFailure);
  }
}
