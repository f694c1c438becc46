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

#include <filesystem>
#include <memory>
#include <string>

#include "tractdiff/eval_study.h"

namespace httplib {
class Server;
}

namespace tractdiff {

inline constexpr char kRaterTokenHeader[] = "X-Rater-Token";

// HTTP front end of a study:
//   GET  /study/{id}/items?rater=...   assigned items for the token's rater
//   GET  /video/{item_or_ref_id}       media bytes
//   POST /rating                       {item_id, verdict, naturalness?, comment?}
//   GET  /study/{id}/scores            per-word progress and scores
// Every request except /video and static files carries the rater token in
// the X-Rater-Token header. Relative video paths resolve against
// `media_root`. When `static_dir` is non-empty it is served at "/".
class StudyServer {
 public:
  StudyServer(Study study, std::filesystem::path log_path, std::filesystem::path media_root,
              std::filesystem::path static_dir = {},
              F1Aggregation agg = F1Aggregation::kPooled);
  ~StudyServer();

  // Binds to an ephemeral port and returns it; 0 on failure.
  int BindToAnyPort(const std::string& host = "127.0.0.1");
  bool Bind(const std::string& host, int port);
  // Blocks until Stop() is called.
  void ListenAfterBind();
  void Stop();
  void WaitUntilReady() const;

  const Study& study() const { return study_; }
  const RatingStore& store() const { return *store_; }

 private:
  void InstallRoutes();

  Study study_;
  std::unique_ptr<RatingStore> store_;
  std::filesystem::path media_root_;
  std::filesystem::path static_dir_;
  F1Aggregation agg_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace tractdiff
