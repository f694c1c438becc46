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

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tractdiff/cli_commands.h"
#include "tractdiff/corpus.h"
#include "tractdiff/eval_study.h"
#include "tractdiff/metrics.h"
#include "tractdiff/raw_tensor_io.h"
#include "tractdiff/wav_io.h"

namespace td = tractdiff;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

const fs::path kWork = fs::temp_directory_path() / "tractdiff_cli_test";

Result Run(const std::string& args) {
  const std::string cmd = "cd '" + kWork.string() + "' && '" TRACTDIFF_CLI "' " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const fs::path& p) {
  const auto bytes = td::ReadFileBytes(p);
  return std::string(bytes.begin(), bytes.end());
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

// Small model so the pipeline runs in seconds.
constexpr const char* kConfig = R"({
  "resolution": 16, "base_channels": 8, "mock_dim": 16,
  "n_heldout_speakers": 1, "n_freeform_per_speaker": 1,
  "train": {"checkpoint_every": 50, "learning_rate": 0.002}
})";

void Reset() {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  std::ofstream(kWork / "cfg.json") << kConfig;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(td::ExitCodeFor(td::ErrorKind::kBadArgument) == 2);
  CHECK(td::ExitCodeFor(td::ErrorKind::kConfigMismatch) == 2);
  CHECK(td::ExitCodeFor(td::ErrorKind::kLoadError) == 3);
  CHECK(td::ExitCodeFor(td::ErrorKind::kDurationMismatch) == 3);
  CHECK(td::ExitCodeFor(td::ErrorKind::kEncoderFailure) == 4);
}

TEST_CASE("run config defaults, file and flag precedence") {
  td::RunConfig c;
  c.UpdateFromJson(json{{"resolution", 32}, {"train", {{"train_steps", 7}}}});
  CHECK(c.resolution == 32);
  CHECK(c.train.train_steps == 7);
  CHECK(c.clip_length == 10);
  c.Finalize();
  CHECK(c.train.model.resolution == 32);
  CHECK(c.train.model.cond_dim == 64);
  td::RunConfig d;
  d.UpdateFromJson(c.ToJson());
  CHECK(d.ToJson() == c.ToJson());
  CHECK_THROWS_AS(c.UpdateFromJson(json{{"resolution", "big"}}), td::Error);

  Reset();
  std::ofstream(kWork / "r.json") << R"({"resolution": 16, "seed": 3})";
  // The flag wins over the file.
  const Result r = Run("--config r.json --resolution 32 toy --out c --subjects 1 --recordings 1 "
                       "--duration 0.4");
  REQUIRE(r.code == 0);
  CHECK(td::ReadRawTensor(kWork / "c" / "s00" / "s00_r000.video").tensor.dim(1) == 32);
}

TEST_CASE("usage and data errors") {
  Reset();
  CHECK(Run("").code == 2);
  CHECK(Run("--bogus toy").code == 2);
  CHECK(Run("--encoder nope toy").code == 2);
  Result r = Run("prepare --corpus missing_root");
  CHECK(r.code == 2);
  CHECK(r.output.find("missing_root") != std::string::npos);
  CHECK(Run("--config nope.json toy").code == 2);
  CHECK(Run("train").code == 2);  // no prepared cache
  td::WriteFileBytes(kWork / "junk.s2ck", std::vector<char>(100, 'x'));
  CHECK(Run("sample --checkpoint junk.s2ck --audio a.wav").code == 3);
  CHECK(Run("--help").code == 0);
}

TEST_CASE("prepare with defaults writes four splits, then detects its cache") {
  Reset();
  REQUIRE(Run("toy --duration 0.5").code == 0);
  Result r = Run("prepare");
  REQUIRE(r.code == 0);
  const json m = json::parse(Slurp(kWork / "cache" / "manifest.json"));
  for (const char* split : {"train", "unseen_speech", "unseen_subject", "unseen_both"}) {
    CHECK(m.contains(split));
  }
  CHECK(m.at("unseen_both").size() == 15 * 8);
  CHECK(m.at("train").size() + m.at("unseen_speech").size() == 5 * 8);
  const auto stamp = fs::last_write_time(kWork / "cache" / "manifest.json");
  r = Run("prepare");
  CHECK(r.code == 0);
  CHECK(r.output.find("cache up to date") != std::string::npos);
  CHECK(fs::last_write_time(kWork / "cache" / "manifest.json") == stamp);
}

TEST_CASE("toy pipeline: train, resume, sample, evaluate") {
  Reset();
  REQUIRE(Run("--config cfg.json toy --subjects 3 --recordings 3 --duration 1").code == 0);
  REQUIRE(Run("--config cfg.json prepare").code == 0);
  const std::string clips = Slurp(kWork / "cache" / "clips.json");

  // Seeded runs are byte-identical.
  fs::rename(kWork / "cache", kWork / "cache_a");
  REQUIRE(Run("--config cfg.json prepare").code == 0);
  CHECK(Slurp(kWork / "cache" / "manifest.json") == Slurp(kWork / "cache_a" / "manifest.json"));
  CHECK(Slurp(kWork / "cache" / "clips.json") == clips);

  Result r = Run("--config cfg.json --steps 200 train");
  REQUIRE(r.code == 0);
  const fs::path ckpt = kWork / "checkpoints" / "latest.s2ck";
  REQUIRE(fs::exists(ckpt));
  std::vector<double> losses;
  {
    std::ifstream log(kWork / "checkpoints" / "loss.txt");
    int64_t step;
    double loss;
    while (log >> step >> loss) losses.push_back(loss);
  }
  REQUIRE(losses.size() == 200);
  CHECK(Median({losses.end() - 50, losses.end()}) < Median({losses.begin(), losses.begin() + 50}));

  SUBCASE("determinism and resume") {
    const std::string first = Slurp(ckpt);
    REQUIRE(Run("--config cfg.json --checkpoints again --steps 200 train").code == 0);
    CHECK(Slurp(kWork / "again" / "latest.s2ck") == first);

    r = Run("--config cfg.json --steps 210 train --resume");
    REQUIRE(r.code == 0);
    CHECK(r.output.find("at step 200") != std::string::npos);
    CHECK(r.output.find("trained to step 210") != std::string::npos);
    r = Run("--config cfg.json --resolution 32 train --resume");
    CHECK(r.code == 2);
    td::WriteFileBytes(kWork / "bad.s2ck", std::vector<char>(first.begin(), first.begin() + 200));
    r = Run("--config cfg.json train --resume bad.s2ck");
    CHECK(r.code == 3);
    CHECK(r.output.find("LoadError") != std::string::npos);
  }

  SUBCASE("sample one recording") {
    td::Waveform w = td::ReadWav(kWork / "cache" / "audio" / "s00_r000.wav");
    w.samples.resize(16000);
    td::WriteWav(kWork / "one_second.wav", w);
    td::WriteRawTensor(kWork / "init.s2v", td::TensorF({16, 16}, 0.5f));
    const std::string args =
        "--config cfg.json --steps 10 --seed 5 sample --audio one_second.wav --init-frame init.s2v ";
    REQUIRE(Run(args + "--out a.s2v --gif a.gif").code == 0);
    REQUIRE(Run(args + "--out b.s2v").code == 0);
    const auto video = td::ReadRawTensor(kWork / "a.s2v");
    CHECK(video.tensor.shape() == td::Shape{50, 16, 16, 1});
    CHECK(Slurp(kWork / "a.s2v") == Slurp(kWork / "b.s2v"));
    CHECK(fs::exists(kWork / "a.gif"));
    const json side = json::parse(Slurp(kWork / "a.s2v.json"));
    CHECK(side.at("seed") == 5);
    CHECK(side.at("n_sample_steps") == 10);
    CHECK(side.at("cfg_scale") == 2.0);
    CHECK(side.at("encoder_id") == "mock");
    CHECK(side.at("checkpoint_digest") == td::HexDigest(td::ReadFileBytes(ckpt)));

    r = Run("--config cfg.json --steps 5 sample --audio one_second.wav --out c.s2v");
    CHECK(r.code == 0);
    CHECK(r.output.find("rest frame") != std::string::npos);
  }

  SUBCASE("sample splits and evaluate") {
    REQUIRE(Run("--config cfg.json --steps 5 sample --split speech").code == 0);
    REQUIRE(Run("--config cfg.json --steps 5 sample --split both").code == 0);
    r = Run("--config cfg.json evaluate --real cache/frames --generated out/generated");
    REQUIRE(r.code == 0);
    CHECK(r.output.find("speech") != std::string::npos);
    const json report = json::parse(Slurp(kWork / "out" / "eval" / "report.json"));
    CHECK(fs::exists(kWork / "out" / "eval" / "table.txt"));
    REQUIRE(report.size() == 2);
    CHECK(report[0].at("extractor_id") == "mock");

    // The report rows equal the metrics module run directly.
    const auto manifest = td::SplitManifest::Load(kWork / "cache" / "manifest.json");
    std::vector<td::TensorF> real, gen;
    for (const auto& id : manifest.unseen_speech) {
      real.push_back(td::ReadRawTensor(kWork / "cache" / "frames" / (id + ".s2v")).tensor);
      gen.push_back(td::ReadRawTensor(kWork / "out" / "generated" / (id + ".s2v")).tensor);
    }
    const auto direct = td::EvaluateSplit("speech", real, gen, td::MockExtractor(), "mock", 0);
    CHECK(report[0].at("fvd").get<double>() == doctest::Approx(direct.fvd));
    CHECK(report[0].at("ssim_mean").get<double>() == doctest::Approx(direct.ssim_mean));

    r = Run("--config cfg.json evaluate --real cache/frames --generated cache/frames --out same");
    REQUIRE(r.code == 0);
    for (const auto& row : json::parse(Slurp(kWork / "same" / "report.json"))) {
      CHECK(row.at("fvd").get<double>() == doctest::Approx(0.0).epsilon(1e-6));
      CHECK(row.at("ssim_mean").get<double>() == doctest::Approx(1.0));
    }
    fs::create_directories(kWork / "empty");
    CHECK(Run("--config cfg.json evaluate --real empty --generated empty").code == 3);
  }
}

TEST_CASE("study build and score") {
  Reset();
  for (const char* cls : {"real", "synth"}) {
    for (const char* word : {"bit", "bat"}) {
      fs::create_directories(kWork / cls / word);
      for (int i = 0; i < 2; ++i) {
        std::ofstream(kWork / cls / word / (std::to_string(i) + ".gif")) << "GIF89a";
      }
    }
  }
  Result r = Run("study build --real real --synth synth --rater ann --out st.json");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("rater ann token") != std::string::npos);
  const td::Study s = td::Study::Load(kWork / "st.json");
  CHECK(s.items.size() == 8);
  r = Run("study score --study st.json");
  CHECK(r.code == 0);
  CHECK(r.output.find("bit") != std::string::npos);
  CHECK(Run("study build --real real --synth nope").code == 2);
}
