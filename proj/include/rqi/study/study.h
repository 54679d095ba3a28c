#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "rqi/stats/thurstone.h"

namespace rqi {

struct StudyItem {
  std::string item_id;
  std::filesystem::path path;
};

struct StudyContent {
  std::string content_id;
  std::vector<StudyItem> items;
};

struct CropPolicy {
  int center_crop = 0;  // 0 means serve the full image
  static CropPolicy parse(const std::string& text);  // "full" or "center_crop:N"
  std::string to_string() const;
};

struct StudyManifest {
  std::string study_id;
  std::vector<StudyContent> contents;
  int min_raters_per_pair = 15;
  CropPolicy crop_policy;
  std::uint64_t seed = 0;
  std::int64_t lease_ms = 10 * 60 * 1000;
};

// JSON text with the field names above; crop_policy is a string. Relative
// image paths resolve against `base_dir`. Throws ValidationError on missing
// fields, bad values, duplicate ids, fewer than 2 items or missing files.
// `check_files` is off when reloading a stored manifest, so that a moved
// image only fails when it is requested.
StudyManifest parse_study_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                                   bool check_files = true);
std::string study_manifest_json(const StudyManifest& manifest);

enum class Side { kLeft, kRight };

// One line of the study log. Issuance lines leave `chosen` and `answered_at`
// empty (JSON null); answer lines repeat the issuance fields and fill them.
// Timestamps are milliseconds since the Unix epoch.
struct ComparisonRecord {
  std::string record_id;
  std::string study_id;
  std::string rater_id;
  std::string content_id;
  std::string left_item;
  std::string right_item;
  std::optional<Side> chosen;
  std::uint64_t assignment_seed = 0;
  std::int64_t issued_at = 0;
  std::optional<std::int64_t> answered_at;
};

std::string record_to_json(const ComparisonRecord& r);
ComparisonRecord record_from_json(const std::string& line);

struct Assignment {
  bool done = false;
  std::string record_id;
  std::string content_id;
  std::string left_item;
  std::string right_item;
  std::uint64_t assignment_seed = 0;
};

struct ChoiceAck {
  std::string record_id;
  bool duplicate = false;
};

struct PairStatus {
  std::string content_id;
  std::string item_a;  // manifest order: item_a precedes item_b
  std::string item_b;
  int coverage = 0;
  int in_flight = 0;
};

struct StudyStatus {
  std::string study_id;
  int min_raters_per_pair = 0;
  std::vector<PairStatus> pairs;
  double completion = 0.0;  // fraction of pairs with coverage >= min_raters
  bool complete = false;
};

struct ContentCounts {
  std::string content_id;
  CountMatrix counts;
};

using Clock = std::function<std::int64_t()>;  // milliseconds since the epoch
Clock system_clock_ms();

// One study: manifest plus replayed log. Not thread-safe on its own; the
// StudyService serializes access.
class Study {
 public:
  // Replays log lines in order. Throws FormatError on a corrupt line.
  Study(StudyManifest manifest, const std::vector<std::string>& log_lines = {});

  const StudyManifest& manifest() const { return manifest_; }

  // Picks uniformly among this rater's eligible pairs with the least
  // coverage + live leases. Eligible pairs are those never issued to the
  // rater. Returns done when the study is complete or nothing is eligible.
  // Otherwise the issuance record is stored in `issued`; nothing changes
  // until it is passed to apply(), so the caller can log it first.
  Assignment next_pair(const std::string& rater_id, std::int64_t now, ComparisonRecord* issued) const;

  // Validates an answer. Returns the record to append, or nullopt for a
  // duplicate. Throws UnknownRecord, StaleRecord or ValidationError.
  std::optional<ComparisonRecord> prepare_choice(const std::string& record_id, const std::string& rater_id,
                                                 Side chosen, std::int64_t now) const;
  // Applies a log record (issuance or answer) to the counters.
  void apply(const ComparisonRecord& record);

  StudyStatus status(std::int64_t now) const;
  std::vector<ContentCounts> export_counts() const;
  const ComparisonRecord& issued_record(const std::string& record_id) const;
  std::size_t pair_count() const { return pairs_.size(); }

 private:
  struct Pair {
    std::size_t content;
    std::size_t a, b;  // item indices, a < b
    int coverage = 0;
    std::string last_issue;  // most recent record id issued for this pair
    std::vector<std::pair<std::string, std::int64_t>> open;  // unanswered (record id, issued_at)
  };
  struct Lease {
    ComparisonRecord record;
    std::size_t pair;
    bool answered = false;
  };

  int live_leases(const Pair& p, std::int64_t now) const;
  std::size_t pair_index(const std::string& content, const std::string& left, const std::string& right) const;

  StudyManifest manifest_;
  std::vector<Pair> pairs_;
  std::map<std::string, std::map<std::string, std::size_t>> item_index_;  // content -> item -> idx
  std::map<std::string, std::size_t> content_index_;
  std::map<std::string, Lease> leases_;                   // by record id
  std::map<std::string, std::vector<char>> rater_seen_;  // rater -> pair flags
  std::uint64_t issued_count_ = 0;
  std::vector<std::vector<std::vector<long>>> wins_;  // [content][i][j]
};

// Owns every study under a root directory (<root>/<id>/manifest.json and
// <root>/<id>/log.jsonl) and replays them on construction. Mutations are
// serialized behind one writer lock; the log is appended one record per
// write(2) call with O_APPEND.
class StudyService {
 public:
  explicit StudyService(std::filesystem::path root, Clock clock = system_clock_ms());

  // Throws ConflictError if the id exists and ValidationError on a bad id.
  void create_study(const StudyManifest& manifest);
  Assignment next_pair(const std::string& study_id, const std::string& rater_id);
  ChoiceAck record_choice(const std::string& study_id, const std::string& record_id, const std::string& rater_id,
                          Side chosen);
  StudyStatus status(const std::string& study_id) const;
  std::vector<ContentCounts> export_counts(const std::string& study_id) const;
  // Encoded PNG of an item, center-cropped per the study's policy.
  std::vector<std::uint8_t> image_png(const std::string& study_id, const std::string& content_id,
                                      const std::string& item_id) const;
  std::vector<std::string> study_ids() const;

 private:
  Study& find(const std::string& id);
  const Study& find(const std::string& id) const;
  void append(const std::string& study_id, const ComparisonRecord& record);

  std::filesystem::path root_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::unique_ptr<Study>> studies_;
};

std::string status_json(const StudyStatus& status);
std::string counts_json(const std::string& study_id, const std::vector<ContentCounts>& counts);
std::vector<ContentCounts> counts_from_json(const std::string& json_text);

}  // namespace rqi
