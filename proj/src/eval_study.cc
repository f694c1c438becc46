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

#include "tractdiff/eval_study.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <tuple>

#include "tractdiff/error.h"
#include "tractdiff/raw_tensor_io.h"

namespace tractdiff {

using nlohmann::json;

std::string VerdictName(Verdict v) { return v == Verdict::kReal ? "real" : "synthetic"; }

Verdict ParseVerdict(const std::string& name) {
  if (name == "real") return Verdict::kReal;
  if (name == "synthetic") return Verdict::kSynthetic;
  Fail(ErrorKind::kBadArgument, "verdict must be 'real' or 'synthetic', got '" + name + "'");
}

json StudyItem::ToJson() const {
  return {{"item_id", item_id},
          {"word", word},
          {"video_ref", video_ref},
          {"ground_truth", VerdictName(ground_truth)}};
}

StudyItem StudyItem::FromJson(const json& j) {
  StudyItem item;
  item.item_id = j.at("item_id");
  item.word = j.at("word");
  item.video_ref = j.at("video_ref");
  item.ground_truth = ParseVerdict(j.at("ground_truth"));
  return item;
}

json StudyItem::RaterJson() const {
  return {{"item_id", item_id}, {"word", word}, {"video_url", "/video/" + item_id}};
}

const StudyItem* Study::FindItem(const std::string& item_id) const {
  for (const StudyItem& item : items) {
    if (item.item_id == item_id) return &item;
  }
  return nullptr;
}

const ReferenceClip* Study::FindReference(const std::string& ref_id) const {
  for (const ReferenceClip& ref : references) {
    if (ref.ref_id == ref_id) return &ref;
  }
  return nullptr;
}

std::optional<std::string> Study::RaterForToken(const std::string& token) const {
  for (const RaterAccount& r : raters) {
    if (!token.empty() && r.token == token) return r.rater_id;
  }
  return std::nullopt;
}

bool Study::HasRater(const std::string& rater_id) const {
  return std::any_of(raters.begin(), raters.end(),
                     [&](const RaterAccount& r) { return r.rater_id == rater_id; });
}

json Study::ToJson() const {
  json j{{"study_id", study_id}, {"words", words}, {"seed", seed}};
  j["items"] = json::array();
  for (const StudyItem& item : items) j["items"].push_back(item.ToJson());
  j["references"] = json::array();
  for (const ReferenceClip& r : references) {
    j["references"].push_back({{"ref_id", r.ref_id}, {"word", r.word}, {"video_ref", r.video_ref}});
  }
  j["raters"] = json::array();
  for (const RaterAccount& r : raters) {
    j["raters"].push_back({{"rater_id", r.rater_id}, {"token", r.token}});
  }
  return j;
}

Study Study::FromJson(const json& j) {
  Study s;
  try {
    s.study_id = j.at("study_id");
    s.words = j.at("words").get<std::vector<std::string>>();
    s.seed = j.at("seed");
    for (const json& item : j.at("items")) s.items.push_back(StudyItem::FromJson(item));
    for (const json& r : j.value("references", json::array())) {
      s.references.push_back({r.at("ref_id"), r.at("word"), r.at("video_ref")});
    }
    for (const json& r : j.value("raters", json::array())) {
      s.raters.push_back({r.at("rater_id"), r.at("token")});
    }
  } catch (const json::exception& e) {
    Fail(ErrorKind::kLoadError, std::string("malformed study: ") + e.what());
  }
  return s;
}

void Study::Save(const std::filesystem::path& path) const {
  const std::string text = ToJson().dump(2) + "\n";
  WriteFileBytes(path, std::vector<char>(text.begin(), text.end()));
}

Study Study::Load(const std::filesystem::path& path) {
  const std::vector<char> bytes = ReadFileBytes(path);
  try {
    return FromJson(json::parse(bytes.begin(), bytes.end()));
  } catch (const json::parse_error& e) {
    Fail(ErrorKind::kLoadError, path.string() + ": " + e.what());
  }
}

Study BuildStudy(const std::string& study_id, const VideosByWord& real,
                 const VideosByWord& synth, uint64_t seed, int max_references) {
  std::set<std::string> words;
  for (const auto& [w, v] : real) words.insert(w);
  for (const auto& [w, v] : synth) words.insert(w);
  for (const std::string& w : words) {
    auto r = real.find(w), s = synth.find(w);
    if (r == real.end() || r->second.empty() || s == synth.end() || s->second.empty()) {
      Fail(ErrorKind::kMissingWordClass,
           "word '" + w + "' needs at least one real and one synthetic video");
    }
  }

  Study study;
  study.study_id = study_id;
  study.seed = seed;
  study.words.assign(words.begin(), words.end());
  std::mt19937_64 rng(seed);
  std::vector<StudyItem> pool;
  for (const std::string& w : study.words) {
    std::vector<std::string> rv = real.at(w), sv = synth.at(w);
    std::sort(rv.begin(), rv.end());
    std::sort(sv.begin(), sv.end());
    std::shuffle(rv.begin(), rv.end(), rng);
    std::shuffle(sv.begin(), sv.end(), rng);
    const size_t n = std::min(rv.size(), sv.size());
    for (size_t i = 0; i < n; ++i) {
      pool.push_back({"", w, rv[i], Verdict::kReal});
      pool.push_back({"", w, sv[i], Verdict::kSynthetic});
    }
    for (size_t i = n; i < rv.size() && static_cast<int>(i - n) < max_references; ++i) {
      study.references.push_back({"ref-" + w + "-" + std::to_string(i - n), w, rv[i]});
    }
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  // Group by word section, keeping the shuffled order inside each word.
  std::stable_sort(pool.begin(), pool.end(),
                   [](const StudyItem& a, const StudyItem& b) { return a.word < b.word; });
  char id[32];
  for (size_t i = 0; i < pool.size(); ++i) {
    std::snprintf(id, sizeof(id), "i%04zu", i);
    pool[i].item_id = id;
  }
  study.items = std::move(pool);
  return study;
}

const RaterAccount& AddRater(Study* study, const std::string& rater_id) {
  if (rater_id.empty()) Fail(ErrorKind::kBadArgument, "empty rater id");
  if (study->HasRater(rater_id)) {
    Fail(ErrorKind::kBadArgument, "rater '" + rater_id + "' already registered");
  }
  const std::string key = std::to_string(study->seed) + "/" + study->study_id + "/" + rater_id;
  const std::string digest = HexDigest(std::vector<char>(key.begin(), key.end()));
  std::mt19937_64 rng(std::stoull(digest, nullptr, 16));
  char token[40];
  std::snprintf(token, sizeof(token), "%016llx%016llx",
                static_cast<unsigned long long>(rng()), static_cast<unsigned long long>(rng()));
  study->raters.push_back({rater_id, token});
  return study->raters.back();
}

json Rating::ToJson() const {
  json j{{"item_id", item_id}, {"rater_id", rater_id}, {"verdict", VerdictName(verdict)},
         {"timestamp", timestamp}};
  if (naturalness) j["naturalness"] = *naturalness;
  if (comment) j["comment"] = *comment;
  return j;
}

Rating Rating::FromJson(const json& j) {
  Rating r;
  try {
    r.item_id = j.at("item_id");
    r.rater_id = j.value("rater_id", "");
    r.verdict = ParseVerdict(j.at("verdict"));
    if (j.contains("naturalness") && !j.at("naturalness").is_null()) {
      if (!j.at("naturalness").is_number_integer()) {
        Fail(ErrorKind::kInvalidScore, "naturalness must be an integer");
      }
      r.naturalness = j.at("naturalness").get<int>();
    }
    if (j.contains("comment") && !j.at("comment").is_null()) {
      r.comment = j.at("comment").get<std::string>();
    }
    r.timestamp = j.value("timestamp", "");
  } catch (const json::exception& e) {
    Fail(ErrorKind::kBadArgument, std::string("malformed rating: ") + e.what());
  }
  return r;
}

void ValidateRating(const Study& study, const Rating& rating) {
  if (study.FindItem(rating.item_id) == nullptr) {
    Fail(ErrorKind::kUnknownItem, "no item '" + rating.item_id + "' in study " + study.study_id);
  }
  if (!study.HasRater(rating.rater_id)) {
    Fail(ErrorKind::kBadArgument, "rater '" + rating.rater_id + "' is not registered");
  }
  if (rating.verdict == Verdict::kReal && rating.naturalness) {
    Fail(ErrorKind::kInvalidScore, "items judged real are not scored");
  }
  if (rating.verdict == Verdict::kSynthetic) {
    if (!rating.naturalness) {
      Fail(ErrorKind::kInvalidScore, "items judged synthetic need a 1-5 naturalness score");
    }
    if (*rating.naturalness < 1 || *rating.naturalness > 5) {
      Fail(ErrorKind::kInvalidScore,
           "naturalness " + std::to_string(*rating.naturalness) + " outside 1-5");
    }
  }
}

std::vector<Rating> ReadRatingsLog(const std::filesystem::path& path) {
  std::vector<Rating> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(Rating::FromJson(json::parse(line)));
    } catch (const json::parse_error& e) {
      Fail(ErrorKind::kLoadError,
           path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

RatingStore::RatingStore(const Study& study, std::filesystem::path log_path)
    : study_(study), log_path_(std::move(log_path)) {
  ratings_ = ReadRatingsLog(log_path_);
  for (const Rating& r : ratings_) seen_.insert({r.item_id, r.rater_id});
}

void RatingStore::Record(Rating rating) {
  ValidateRating(study_, rating);
  if (rating.timestamp.empty()) {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    rating.timestamp = buf;
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (seen_.count({rating.item_id, rating.rater_id})) {
    Fail(ErrorKind::kDuplicateRating,
         "rater '" + rating.rater_id + "' already rated item '" + rating.item_id + "'");
  }
  if (!log_path_.parent_path().empty()) {
    std::filesystem::create_directories(log_path_.parent_path());
  }
  std::ofstream out(log_path_, std::ios::app);
  out << rating.ToJson().dump() << "\n";
  out.flush();
  if (!out) Fail(ErrorKind::kIoError, "cannot append to " + log_path_.string());
  seen_.insert({rating.item_id, rating.rater_id});
  ratings_.push_back(std::move(rating));
}

std::vector<Rating> RatingStore::Snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return ratings_;
}

Confusion ConfusionFor(const Study& study, const std::vector<Rating>& ratings,
                       const std::string& word, const std::optional<std::string>& rater) {
  Confusion c;
  for (const Rating& r : ratings) {
    if (rater && r.rater_id != *rater) continue;
    const StudyItem* item = study.FindItem(r.item_id);
    if (item == nullptr || item->word != word) continue;
    const bool truth = item->ground_truth == Verdict::kSynthetic;
    const bool said = r.verdict == Verdict::kSynthetic;
    if (truth && said) ++c.tp;
    if (!truth && said) ++c.fp;
    if (truth && !said) ++c.fn;
    if (!truth && !said) ++c.tn;
  }
  return c;
}

double F1FromConfusion(const Confusion& c) {
  const int64_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * c.tp / static_cast<double>(denom);
}

double ComputeF1(const Study& study, const std::vector<Rating>& ratings,
                 const std::string& word, F1Aggregation agg) {
  const Confusion pooled = ConfusionFor(study, ratings, word);
  if (pooled.tp + pooled.fp + pooled.fn + pooled.tn == 0) {
    Fail(ErrorKind::kNoRatings, "no ratings for word '" + word + "'");
  }
  if (agg == F1Aggregation::kPooled) return F1FromConfusion(pooled);
  std::set<std::string> raters;
  for (const Rating& r : ratings) {
    const StudyItem* item = study.FindItem(r.item_id);
    if (item != nullptr && item->word == word) raters.insert(r.rater_id);
  }
  double sum = 0.0;
  for (const std::string& rater : raters) {
    sum += F1FromConfusion(ConfusionFor(study, ratings, word, rater));
  }
  return sum / raters.size();
}

namespace {

std::pair<std::optional<double>, std::optional<double>> MosParts(
    const Study& study, const std::vector<Rating>& ratings, const std::string& word) {
  double sum_gt = 0.0, sum_syn = 0.0;
  int64_t n_gt = 0, n_syn = 0;
  for (const Rating& r : ratings) {
    if (!r.naturalness) continue;
    const StudyItem* item = study.FindItem(r.item_id);
    if (item == nullptr || item->word != word) continue;
    if (item->ground_truth == Verdict::kReal) {
      sum_gt += *r.naturalness;
      ++n_gt;
    } else {
      sum_syn += *r.naturalness;
      ++n_syn;
    }
  }
  std::pair<std::optional<double>, std::optional<double>> out;
  if (n_gt > 0) out.first = sum_gt / n_gt;
  if (n_syn > 0) out.second = sum_syn / n_syn;
  return out;
}

}  // namespace

std::pair<double, double> ComputeMos(const Study& study, const std::vector<Rating>& ratings,
                                     const std::string& word) {
  const auto [gt, syn] = MosParts(study, ratings, word);
  if (!gt || !syn) {
    Fail(ErrorKind::kNoRatings, "word '" + word + "' lacks scored ratings for " +
                                    (!gt ? "real" : "synthetic") + " items");
  }
  return {*gt, *syn};
}

std::vector<WordScores> ComputeScores(const Study& study, const std::vector<Rating>& ratings,
                                      F1Aggregation agg) {
  std::vector<WordScores> out;
  for (const std::string& word : study.words) {
    WordScores s;
    s.word = word;
    for (const StudyItem& item : study.items) s.n_items += item.word == word;
    const Confusion c = ConfusionFor(study, ratings, word);
    s.n_ratings = c.tp + c.fp + c.fn + c.tn;
    if (s.n_ratings > 0) s.f1 = ComputeF1(study, ratings, word, agg);
    std::tie(s.mos_gt, s.mos_a2v) = MosParts(study, ratings, word);
    out.push_back(s);
  }
  return out;
}

json ScoresToJson(const std::vector<WordScores>& scores) {
  json out = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const WordScores& s : scores) {
    out.push_back({{"word", s.word},
                   {"f1", opt(s.f1)},
                   {"mos_gt", opt(s.mos_gt)},
                   {"mos_a2v", opt(s.mos_a2v)},
                   {"n_ratings", s.n_ratings},
                   {"n_items", s.n_items}});
  }
  return out;
}

std::string FormatScoresTable(const std::vector<WordScores>& scores) {
  auto cell = [](const std::optional<double>& v) {
    char buf[16];
    if (!v) return std::string("-");
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return std::string(buf);
  };
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %6s\n", "Word", "F1", "MOS-GT",
                "MOS-A2V", "n");
  out += line;
  for (const WordScores& s : scores) {
    std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %6lld\n", s.word.c_str(),
                  cell(s.f1).c_str(), cell(s.mos_gt).c_str(), cell(s.mos_a2v).c_str(),
                  static_cast<long long>(s.n_ratings));
    out += line;
  }
  return out;
}

}  // namespace tractdiff
