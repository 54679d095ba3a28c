#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "rqi/study/study.h"

namespace rqi {

// HTTP front end of a StudyService. Bodies are JSON; errors come back as
// {"error": <kind>, "message": <text>} with 400 (validation), 404 (unknown
// study, record or image), 409 (conflict), 410 (stale lease) or 500.
//
//   POST /studies                        manifest -> {study_id, pairs}
//   GET  /studies                        -> {studies: [...]}
//   GET  /studies/{id}/next?rater=R      -> assignment or {done: true}
//   POST /studies/{id}/choices           {record_id, rater_id?, chosen}
//   GET  /studies/{id}/status
//   GET  /studies/{id}/export            per-content count matrices
//   GET  /studies/{id}/images/{item}?content=C   PNG bytes
//
// Item ids are unique only within a content, hence the content query
// parameter on image URLs. Relative image paths in posted manifests resolve
// against `manifest_base_dir`.
class StudyServer {
 public:
  StudyServer(StudyService& service, std::filesystem::path manifest_base_dir);
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  // Binds and returns the port (an ephemeral one when `port` is 0).
  // Throws IoError if binding fails.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void listen();
  // listen() on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rqi
