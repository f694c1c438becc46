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
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tractdiff/error.h"

namespace tractdiff {

enum class Verdict { kReal, kSynthetic };

std::string VerdictName(Verdict v);
Verdict ParseVerdict(const std::string& name);

struct StudyItem {
  std::string item_id;
  std::string word;
  std::string video_ref;
  Verdict ground_truth = Verdict::kReal;

  // Full record, for the study file.
  nlohmann::json ToJson() const;
  static StudyItem FromJson(const nlohmann::json& j);
  // What a rater may see: no ground truth, no file path.
  nlohmann::json RaterJson() const;
};

struct ReferenceClip {
  std::string ref_id;
  std::string word;
  std::string video_ref;
};

struct RaterAccount {
  std::string rater_id;
  std::string token;
};

struct Study {
  std::string study_id;
  std::vector<StudyItem> items;  // presentation order
  std::vector<std::string> words;
  uint64_t seed = 0;
  std::vector<ReferenceClip> references;
  std::vector<RaterAccount> raters;

  const StudyItem* FindItem(const std::string& item_id) const;
  const ReferenceClip* FindReference(const std::string& ref_id) const;
  std::optional<std::string> RaterForToken(const std::string& token) const;
  bool HasRater(const std::string& rater_id) const;

  nlohmann::json ToJson() const;
  static Study FromJson(const nlohmann::json& j);
  void Save(const std::filesystem::path& path) const;
  static Study Load(const std::filesystem::path& path);
};

using VideosByWord = std::map<std::string, std::vector<std::string>>;

// Per word, min(#real, #synthetic) items of each class, presented in a
// seeded random order. Real videos left over after that are kept as
// reference clips (up to `max_references` per word).
Study BuildStudy(const std::string& study_id, const VideosByWord& real,
                 const VideosByWord& synth, uint64_t seed, int max_references = 2);

// Adds a rater with a token derived from (study seed, rater id).
const RaterAccount& AddRater(Study* study, const std::string& rater_id);

struct Rating {
  std::string item_id;
  std::string rater_id;
  Verdict verdict = Verdict::kReal;
  std::optional<int> naturalness;  // 1-5, present iff verdict is synthetic
  std::optional<std::string> comment;
  std::string timestamp;

  nlohmann::json ToJson() const;
  static Rating FromJson(const nlohmann::json& j);
};

// Throws UnknownItem, InvalidScore or BadArgument (unregistered rater).
void ValidateRating(const Study& study, const Rating& rating);

// Append-only ratings log, one JSON object per line. Safe for concurrent
// Record calls; each rating is flushed before Record returns.
class RatingStore {
 public:
  RatingStore(const Study& study, std::filesystem::path log_path);

  // Validates, rejects duplicate (item, rater) pairs with DuplicateRating,
  // then appends.
  void Record(Rating rating);
  std::vector<Rating> Snapshot() const;

 private:
  const Study& study_;
  std::filesystem::path log_path_;
  mutable std::mutex mu_;
  std::vector<Rating> ratings_;
  std::set<std::pair<std::string, std::string>> seen_;
};

std::vector<Rating> ReadRatingsLog(const std::filesystem::path& path);

enum class F1Aggregation { kPooled, kPerRaterMean };

struct Confusion {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Positive class: synthetic. Restricted to ratings of `word`, and to one
// rater when given.
Confusion ConfusionFor(const Study& study, const std::vector<Rating>& ratings,
                       const std::string& word,
                       const std::optional<std::string>& rater = std::nullopt);
double F1FromConfusion(const Confusion& c);

double ComputeF1(const Study& study, const std::vector<Rating>& ratings,
                 const std::string& word, F1Aggregation agg = F1Aggregation::kPooled);

// (MOS over ground-truth real items, MOS over synthetic items), counting
// only ratings that carry a naturalness score.
std::pair<double, double> ComputeMos(const Study& study, const std::vector<Rating>& ratings,
                                     const std::string& word);

struct WordScores {
  std::string word;
  std::optional<double> f1;
  std::optional<double> mos_gt;
  std::optional<double> mos_a2v;
  int64_t n_ratings = 0;
  int64_t n_items = 0;
};

std::vector<WordScores> ComputeScores(const Study& study, const std::vector<Rating>& ratings,
                                      F1Aggregation agg = F1Aggregation::kPooled);
nlohmann::json ScoresToJson(const std::vector<WordScores>& scores);
// Word | F1 | MOS-GT | MOS-A2V, two decimals.
std::string FormatScoresTable(const std::vector<WordScores>& scores);

}  // namespace tractdiff
