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
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "tractdiff/raw_tensor_io.h"
#include "tractdiff/study_server.h"

namespace td = tractdiff;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Walks a JSON value and reports whether any object has the key.
bool HasKey(const json& j, const std::string& key) {
  if (j.is_object()) {
    if (j.contains(key)) return true;
    for (const auto& [k, v] : j.items()) {
      if (HasKey(v, key)) return true;
    }
  }
  if (j.is_array()) {
    for (const auto& v : j) {
      if (HasKey(v, key)) return true;
    }
  }
  return false;
}

struct Fixture {
  fs::path dir = fs::temp_directory_path() / "tractdiff_server_test";
  td::Study study;
  std::unique_ptr<td::StudyServer> server;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;
  httplib::Headers alice, bob;

  Fixture() {
    fs::remove_all(dir);
    fs::create_directories(dir / "media");
    for (const char* name : {"r1.gif", "r2.gif", "r3.gif", "s1.gif", "s2.gif"}) {
      const std::string body = std::string("GIF89a-") + name;
      td::WriteFileBytes(dir / "media" / name, std::vector<char>(body.begin(), body.end()));
    }
    study = td::BuildStudy("pilot", {{"bit", {"media/r1.gif", "media/r2.gif", "media/r3.gif"}}},
                           {{"bit", {"media/s1.gif", "media/s2.gif"}}}, 1);
    alice = {{td::kRaterTokenHeader, td::AddRater(&study, "alice").token}};
    bob = {{td::kRaterTokenHeader, td::AddRater(&study, "bob").token}};
    server = std::make_unique<td::StudyServer>(study, dir / "ratings.jsonl", dir, "",
                                               td::F1Aggregation::kPooled);
    const int port = server->BindToAnyPort("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server->ListenAfterBind(); });
    server->WaitUntilReady();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  ~Fixture() {
    server->Stop();
    thread.join();
    fs::remove_all(dir);
  }

  const td::StudyItem& ItemOf(td::Verdict truth) const {
    for (const auto& item : study.items) {
      if (item.ground_truth == truth) return item;
    }
    throw std::runtime_error("no item");
  }
};

}  // namespace

TEST_CASE("items endpoint needs a token and hides ground truth") {
  Fixture f;
  auto res = f.client->Get("/study/pilot/items");
  REQUIRE(res);
  CHECK(res->status == 401);
  res = f.client->Get("/study/pilot/items", f.alice);
  REQUIRE(res);
  REQUIRE(res->status == 200);
  const json body = json::parse(res->body);
  CHECK(body.at("items").size() == 4);
  CHECK(body.at("references").size() == 1);
  CHECK(body.at("rater_id") == "alice");
  CHECK_FALSE(HasKey(body, "ground_truth"));
  CHECK_FALSE(HasKey(body, "video_ref"));
  CHECK(f.client->Get("/study/other/items", f.alice)->status == 404);
  CHECK(f.client->Get("/study/pilot/items?rater=bob", f.alice)->status == 403);
}

TEST_CASE("video endpoint streams the media file") {
  Fixture f;
  const auto& item = f.study.items[0];
  auto res = f.client->Get("/video/" + item.item_id);
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "image/gif");
  CHECK(res->body.rfind("GIF89a-", 0) == 0);
  CHECK(f.client->Get("/video/" + f.study.references[0].ref_id)->status == 200);
  CHECK(f.client->Get("/video/nope")->status == 404);
}

TEST_CASE("ratings round trip into scores") {
  Fixture f;
  const auto& synth = f.ItemOf(td::Verdict::kSynthetic);
  const auto& real = f.ItemOf(td::Verdict::kReal);
  auto post = [&](const httplib::Headers& h, const json& body) {
    return f.client->Post("/rating", h, body.dump(), "application/json");
  };
  auto res = post(f.alice, {{"item_id", synth.item_id}, {"verdict", "synthetic"}, {"naturalness", 2}});
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK_FALSE(HasKey(json::parse(res->body), "ground_truth"));
  CHECK(post(f.alice, {{"item_id", real.item_id}, {"verdict", "real"}})->status == 200);
  CHECK(post(f.alice, {{"item_id", real.item_id}, {"verdict", "real"}})->status == 409);
  CHECK(post(f.alice, {{"item_id", "zzz"}, {"verdict", "real"}})->status == 404);
  CHECK(post(f.bob, {{"item_id", synth.item_id}, {"verdict", "synthetic"}})->status == 400);
  CHECK(post(f.bob, {{"item_id", synth.item_id}, {"verdict", "real"}, {"naturalness", 3}})
            ->status == 400);
  CHECK(post({}, {{"item_id", synth.item_id}, {"verdict", "real"}})->status == 401);
  CHECK(f.client->Post("/rating", f.bob, "{not json", "application/json")->status == 400);
  // The token decides the rater, not the body.
  CHECK(post(f.bob, {{"item_id", synth.item_id}, {"verdict", "real"}, {"rater_id", "alice"}})
            ->status == 200);

  auto items = json::parse(f.client->Get("/study/pilot/items", f.alice)->body);
  int rated = 0;
  for (const auto& i : items.at("items")) rated += i.at("rated").get<bool>();
  CHECK(rated == 2);

  auto res_scores = f.client->Get("/study/pilot/scores", f.alice);
  REQUIRE(res_scores);
  REQUIRE(res_scores->status == 200);
  const json scores = json::parse(res_scores->body);
  CHECK(scores.at("n_ratings") == 3);
  const json& bit = scores.at("words").at(0);
  CHECK(bit.at("word") == "bit");
  // alice: TP on synth, TN on real; bob: FN on synth. F1 = 2 / (2 + 0 + 1).
  CHECK(bit.at("f1").get<double>() == doctest::Approx(2.0 / 3.0));
  CHECK(bit.at("mos_a2v").get<double>() == doctest::Approx(2.0));

  const auto log = td::ReadRatingsLog(f.dir / "ratings.jsonl");
  CHECK(log.size() == 3);
  CHECK(log[2].rater_id == "bob");
}
