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
#include <fstream>
#include <functional>
#include <set>
#include <thread>

#include "doctest.h"
#include "tractdiff/eval_study.h"

namespace td = tractdiff;
namespace fs = std::filesystem;
using V = td::Verdict;

namespace {

td::Study MakeStudy() {
  td::VideosByWord real = {{"bat", {"r1", "r2", "r3"}}, {"bet", {"r4", "r5"}}};
  td::VideosByWord synth = {{"bat", {"s1", "s2"}}, {"bet", {"s3", "s4"}}};
  td::Study s = td::BuildStudy("st", real, synth, 42);
  td::AddRater(&s, "alice");
  td::AddRater(&s, "bob");
  return s;
}

fs::path FreshLog(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tractdiff_eval_study_test";
  fs::create_directories(dir);
  fs::remove(dir / name);
  return dir / name;
}

td::Rating R(const std::string& item, const std::string& rater, V v, std::optional<int> score) {
  td::Rating r;
  r.item_id = item;
  r.rater_id = rater;
  r.verdict = v;
  r.naturalness = score;
  return r;
}

td::ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const td::Error& e) {
    return e.kind();
  }
  FAIL("no error");
  return td::ErrorKind::kBadArgument;
}

}  // namespace

TEST_CASE("study construction balances classes and keeps references") {
  const td::Study s = MakeStudy();
  CHECK(s.items.size() == 8);
  CHECK(s.words == std::vector<std::string>{"bat", "bet"});
  int real = 0;
  for (const auto& item : s.items) real += item.ground_truth == V::kReal;
  CHECK(real == 4);
  REQUIRE(s.references.size() == 1);
  CHECK(s.references[0].word == "bat");
  // Same inputs and seed: same study, same tokens.
  const td::Study again = MakeStudy();
  CHECK(again.ToJson() == s.ToJson());
  CHECK(td::Study::FromJson(s.ToJson()).ToJson() == s.ToJson());
  CHECK(s.RaterForToken(s.raters[0].token) == "alice");
  CHECK_FALSE(s.RaterForToken("nope").has_value());
  CHECK(KindOf([] { td::BuildStudy("x", {{"w", {"a"}}}, {}, 0); }) ==
        td::ErrorKind::kMissingWordClass);
}

TEST_CASE("rater view never carries the ground truth") {
  const td::Study s = MakeStudy();
  for (const auto& item : s.items) {
    const auto j = item.RaterJson();
    CHECK_FALSE(j.contains("ground_truth"));
    CHECK_FALSE(j.contains("video_ref"));
    CHECK(j.at("item_id") == item.item_id);
  }
}

TEST_CASE("rating validation") {
  const td::Study s = MakeStudy();
  const std::string id = s.items[0].item_id;
  CHECK(KindOf([&] { td::ValidateRating(s, R("zzz", "alice", V::kReal, {})); }) ==
        td::ErrorKind::kUnknownItem);
  CHECK(KindOf([&] { td::ValidateRating(s, R(id, "mallory", V::kReal, {})); }) ==
        td::ErrorKind::kBadArgument);
  CHECK(KindOf([&] { td::ValidateRating(s, R(id, "alice", V::kSynthetic, {})); }) ==
        td::ErrorKind::kInvalidScore);
  CHECK(KindOf([&] { td::ValidateRating(s, R(id, "alice", V::kSynthetic, 6)); }) ==
        td::ErrorKind::kInvalidScore);
  CHECK(KindOf([&] { td::ValidateRating(s, R(id, "alice", V::kReal, 3)); }) ==
        td::ErrorKind::kInvalidScore);
  td::ValidateRating(s, R(id, "alice", V::kSynthetic, 5));
}

TEST_CASE("rating store appends, rejects duplicates and replays") {
  const td::Study s = MakeStudy();
  const fs::path log = FreshLog("a.jsonl");
  td::RatingStore store(s, log);
  store.Record(R(s.items[0].item_id, "alice", V::kReal, {}));
  CHECK(KindOf([&] { store.Record(R(s.items[0].item_id, "alice", V::kSynthetic, 2)); }) ==
        td::ErrorKind::kDuplicateRating);
  store.Record(R(s.items[0].item_id, "bob", V::kSynthetic, 2));
  const auto replay = td::ReadRatingsLog(log);
  REQUIRE(replay.size() == 2);
  CHECK(replay[1].naturalness == 2);
  CHECK_FALSE(replay[0].timestamp.empty());
  // A new store over the same log keeps duplicate protection.
  td::RatingStore reopened(s, log);
  CHECK(reopened.Snapshot().size() == 2);
  CHECK(KindOf([&] { reopened.Record(R(s.items[0].item_id, "bob", V::kReal, {})); }) ==
        td::ErrorKind::kDuplicateRating);
}

TEST_CASE("concurrent recording loses nothing") {
  td::VideosByWord real, synth;
  for (int i = 0; i < 50; ++i) {
    real["w"].push_back("r" + std::to_string(i));
    synth["w"].push_back("s" + std::to_string(i));
  }
  td::Study s = td::BuildStudy("big", real, synth, 0);
  for (int r = 0; r < 4; ++r) td::AddRater(&s, "r" + std::to_string(r));
  const fs::path log = FreshLog("c.jsonl");
  td::RatingStore store(s, log);
  std::vector<std::thread> threads;
  for (int r = 0; r < 4; ++r) {
    threads.emplace_back([&, r] {
      for (const auto& item : s.items) {
        store.Record(R(item.item_id, "r" + std::to_string(r), V::kReal, {}));
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(td::ReadRatingsLog(log).size() == 400);
}

TEST_CASE("f1 and mos against hand counts") {
  const td::Study s = MakeStudy();
  std::vector<td::Rating> ratings;
  for (const auto& item : s.items) {
    if (item.word != "bet") continue;
    // alice: always synthetic with score 4. bob: always real.
    ratings.push_back(R(item.item_id, "alice", V::kSynthetic, 4));
    ratings.push_back(R(item.item_id, "bob", V::kReal, {}));
  }
  const td::Confusion c = td::ConfusionFor(s, ratings, "bet");
  CHECK(c.tp == 2);
  CHECK(c.fp == 2);
  CHECK(c.fn == 2);
  CHECK(c.tn == 2);
  CHECK(td::ComputeF1(s, ratings, "bet") == doctest::Approx(0.5));
  // alice alone: F1 = 2*2 / (4 + 2 + 0); bob alone: 0.
  CHECK(td::ComputeF1(s, ratings, "bet", td::F1Aggregation::kPerRaterMean) ==
        doctest::Approx((2.0 / 3.0 + 0.0) / 2));
  const auto [gt, a2v] = td::ComputeMos(s, ratings, "bet");
  CHECK(gt == 4.0);
  CHECK(a2v == 4.0);
  CHECK(KindOf([&] { td::ComputeF1(s, ratings, "bat"); }) == td::ErrorKind::kNoRatings);
  const auto scores = td::ComputeScores(s, ratings);
  REQUIRE(scores.size() == 2);
  CHECK_FALSE(scores[0].f1.has_value());
  CHECK(scores[1].f1.value() == doctest::Approx(0.5));
  CHECK(td::FormatScoresTable(scores).find("0.50") != std::string::npos);
  CHECK(td::F1FromConfusion({0, 0, 0, 5}) == 0.0);
}
