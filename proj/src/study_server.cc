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

#include "tractdiff/study_server.h"

#include <set>

#include "httplib.h"
#include "tractdiff/raw_tensor_io.h"

namespace tractdiff {
namespace {

using nlohmann::json;

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void ReplyError(httplib::Response& res, int status, const std::string& message) {
  Reply(res, status, json{{"error", message}});
}

int StatusFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDuplicateRating: return 409;
    case ErrorKind::kUnknownItem: return 404;
    case ErrorKind::kNoRatings: return 404;
    case ErrorKind::kIoError: return 500;
    default: return 400;
  }
}

std::string ContentTypeFor(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".gif") return "image/gif";
  if (ext == ".mp4") return "video/mp4";
  if (ext == ".webm") return "video/webm";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

}  // namespace

StudyServer::StudyServer(Study study, std::filesystem::path log_path,
                         std::filesystem::path media_root, std::filesystem::path static_dir,
                         F1Aggregation agg)
    : study_(std::move(study)),
      media_root_(std::move(media_root)),
      static_dir_(std::move(static_dir)),
      agg_(agg),
      server_(std::make_unique<httplib::Server>()) {
  store_ = std::make_unique<RatingStore>(study_, std::move(log_path));
  InstallRoutes();
}

StudyServer::~StudyServer() { Stop(); }

void StudyServer::InstallRoutes() {
  httplib::Server& s = *server_;
  auto rater_of = [this](const httplib::Request& req) {
    return study_.RaterForToken(req.get_header_value(kRaterTokenHeader));
  };

  s.Get(R"(/study/([^/]+)/items)", [this, rater_of](const httplib::Request& req,
                                                   httplib::Response& res) {
    if (req.matches[1] != study_.study_id) return ReplyError(res, 404, "unknown study");
    const auto rater = rater_of(req);
    if (!rater) return ReplyError(res, 401, "missing or invalid rater token");
    if (req.has_param("rater") && req.get_param_value("rater") != *rater) {
      return ReplyError(res, 403, "token does not belong to the requested rater");
    }
    std::set<std::string> done;
    for (const Rating& r : store_->Snapshot()) {
      if (r.rater_id == *rater) done.insert(r.item_id);
    }
    json items = json::array();
    for (const StudyItem& item : study_.items) {
      json j = item.RaterJson();
      j["rated"] = done.count(item.item_id) > 0;
      items.push_back(j);
    }
    json refs = json::array();
    for (const ReferenceClip& r : study_.references) {
      refs.push_back({{"ref_id", r.ref_id}, {"word", r.word}, {"video_url", "/video/" + r.ref_id}});
    }
    Reply(res, 200, json{{"study_id", study_.study_id},
                         {"rater_id", *rater},
                         {"words", study_.words},
                         {"references", refs},
                         {"items", items}});
  });

  s.Get(R"(/video/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::string ref;
    if (const StudyItem* item = study_.FindItem(id)) {
      ref = item->video_ref;
    } else if (const ReferenceClip* clip = study_.FindReference(id)) {
      ref = clip->video_ref;
    } else {
      return ReplyError(res, 404, "unknown video");
    }
    std::filesystem::path path(ref);
    if (path.is_relative()) path = media_root_ / path;
    try {
      const std::vector<char> bytes = ReadFileBytes(path);
      res.status = 200;
      res.set_content(std::string(bytes.begin(), bytes.end()), ContentTypeFor(path));
    } catch (const Error&) {
      ReplyError(res, 404, "video file unavailable");
    }
  });

  s.Post("/rating", [this, rater_of](const httplib::Request& req, httplib::Response& res) {
    const auto rater = rater_of(req);
    if (!rater) return ReplyError(res, 401, "missing or invalid rater token");
    try {
      json body = json::parse(req.body);
      if (!body.is_object()) return ReplyError(res, 400, "rating must be a JSON object");
      body["rater_id"] = *rater;
      body.erase("timestamp");
      Rating rating = Rating::FromJson(body);
      store_->Record(std::move(rating));
      Reply(res, 200, json{{"ok", true}, {"item_id", body.at("item_id")}});
    } catch (const json::exception& e) {
      ReplyError(res, 400, std::string("bad JSON: ") + e.what());
    } catch (const Error& e) {
      ReplyError(res, StatusFor(e.kind()), e.what());
    }
  });

  s.Get(R"(/study/([^/]+)/scores)", [this, rater_of](const httplib::Request& req,
                                                    httplib::Response& res) {
    if (req.matches[1] != study_.study_id) return ReplyError(res, 404, "unknown study");
    if (!rater_of(req)) return ReplyError(res, 401, "missing or invalid rater token");
    const std::vector<Rating> snapshot = store_->Snapshot();
    Reply(res, 200, json{{"study_id", study_.study_id},
                         {"n_ratings", snapshot.size()},
                         {"words", ScoresToJson(ComputeScores(study_, snapshot, agg_))}});
  });

  if (!static_dir_.empty()) s.set_mount_point("/", static_dir_.string());
}

int StudyServer::BindToAnyPort(const std::string& host) {
  const int port = server_->bind_to_any_port(host);
  return port < 0 ? 0 : port;
}

bool StudyServer::Bind(const std::string& host, int port) {
  return server_->bind_to_port(host, port);
}

void StudyServer::ListenAfterBind() { server_->listen_after_bind(); }

void StudyServer::Stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void StudyServer::WaitUntilReady() const { server_->wait_until_ready(); }

}  // namespace tractdiff
