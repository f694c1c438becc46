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

#include "doctest.h"
#include "tractdiff/checkpoint.h"
#include "tractdiff/raw_tensor_io.h"
#include "tractdiff/speech_encoding.h"
#include "tractdiff/toy_corpus.h"
#include "tractdiff/trainer.h"

namespace td = tractdiff;
namespace fs = std::filesystem;

namespace {

std::vector<td::TrainingExample> TinyData() {
  const auto rec = td::AlignAndTruncate(td::GenerateToyCorpus(1, 1, 0.5, 16, 0)[0], 3);
  return td::WindowClips(rec, td::EncodeSentence(td::MockEncoder(4), rec), 3, 3);
}

td::TrainConfig TinyConfig() {
  td::TrainConfig c;
  c.model = td::DefaultDenoiserConfig(16, 4, 3, false);
  c.model.base_channels = 4;
  c.model.norm_groups = 2;
  c.train_steps = 3;
  c.mock_dim = 4;
  return c;
}

fs::path Temp(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tractdiff_checkpoint_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("train config json round trip") {
  td::TrainConfig c = TinyConfig();
  c.learning_rate = 3e-4;
  c.schedule = td::ScheduleKind::kLinear;
  td::TrainConfig d;
  d.UpdateFromJson(c.ToJson());
  CHECK(d.ToJson() == c.ToJson());
  CHECK_THROWS_AS(d.UpdateFromJson(nlohmann::json{{"learning_rate", "fast"}}), td::Error);
}

TEST_CASE("training reduces loss on a tiny set") {
  const auto data = TinyData();
  td::TrainConfig c = TinyConfig();
  c.train_steps = 60;
  c.learning_rate = 3e-3;
  td::Trainer t(c);
  std::vector<float> losses;
  t.Train(data, [&](int64_t, float l) { losses.push_back(l); });
  REQUIRE(losses.size() == 60);
  float first = 0, last = 0;
  for (int i = 0; i < 10; ++i) {
    first += losses[i];
    last += losses[50 + i];
  }
  CHECK(last < first);
  CHECK(t.step() == 60);
}

TEST_CASE("resume from a checkpoint continues bit-exactly") {
  const auto data = TinyData();
  td::Trainer straight(TinyConfig());
  straight.mutable_config().train_steps = 6;
  straight.set_rest_frame(td::Trainer::MeanInitFrame(data));
  std::vector<float> want;
  straight.Train(data, [&](int64_t, float l) { want.push_back(l); });

  td::Trainer first(TinyConfig());
  first.set_rest_frame(td::Trainer::MeanInitFrame(data));
  std::vector<float> got;
  first.Train(data, [&](int64_t, float l) { got.push_back(l); });
  const fs::path path = Temp("a.s2ck");
  td::SaveCheckpoint(path, first);
  auto resumed = td::LoadCheckpoint(path, first.config().model);
  CHECK(resumed->step() == 3);
  CHECK(resumed->rest_frame() == first.rest_frame());
  resumed->mutable_config().train_steps = 6;
  resumed->Train(data, [&](int64_t, float l) { got.push_back(l); });
  CHECK(got == want);
  auto pa = straight.model().Params();
  auto pb = resumed->model().Params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second->value == pb[i].second->value);
}

TEST_CASE("checkpoint errors are typed") {
  td::Trainer t(TinyConfig());
  const fs::path path = Temp("b.s2ck");
  td::SaveCheckpoint(path, t);

  td::DenoiserConfig other = t.config().model;
  other.base_channels = 8;
  try {
    td::LoadCheckpoint(path, other);
    FAIL("expected ConfigMismatch");
  } catch (const td::Error& e) {
    CHECK(e.kind() == td::ErrorKind::kConfigMismatch);
  }

  auto bytes = td::ReadFileBytes(path);
  for (auto mutate : {0, 1, 2}) {
    auto bad = bytes;
    if (mutate == 0) bad[1] = 'Z';
    if (mutate == 1) bad.resize(bad.size() / 2);
    if (mutate == 2) bad.push_back('x');
    const fs::path p = Temp("bad.s2ck");
    td::WriteFileBytes(p, bad);
    try {
      td::LoadCheckpoint(p);
      FAIL("expected LoadError");
    } catch (const td::Error& e) {
      CHECK(e.kind() == td::ErrorKind::kLoadError);
    }
  }
  CHECK_THROWS_AS(td::LoadCheckpoint(Temp("missing.s2ck")), td::Error);
}

TEST_CASE("gradient clipping and adam") {
  td::nn::Param<float> p("w", {2});
  p.value = td::TensorF({2}, {1.0f, 1.0f});
  p.grad = td::TensorF({2}, {3.0f, 4.0f});
  td::nn::ParamRefs<float> refs = {{"w", &p}};
  CHECK(td::ClipGradNorm(refs, 1.0) == doctest::Approx(5.0));
  CHECK(p.grad[0] == doctest::Approx(0.6));
  CHECK(p.grad[1] == doctest::Approx(0.8));
  td::AdamState adam;
  td::AdamUpdate(refs, &adam, 0.1);
  // First Adam step moves each weight by lr against the gradient sign.
  CHECK(p.value[0] == doctest::Approx(0.9).epsilon(1e-5));
  CHECK(p.value[1] == doctest::Approx(0.9).epsilon(1e-5));
}
