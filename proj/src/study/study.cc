#include "rqi/study/study.h"

#include <fcntl.h>
#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <json.hpp>
#include <set>
#include <sstream>

#include "rqi/error.h"
#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/util/file.h"
#include "rqi/util/rng.h"

namespace rqi {
namespace {

using Json = nlohmann::ordered_json;

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id[0] == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

void require_id(const std::string& id, const char* what) {
  if (!valid_id(id)) {
    throw ValidationError(fmt::format("invalid {} '{}': use 1-128 of [A-Za-z0-9._-], not starting with '.'", what, id));
  }
}

const char* side_name(Side s) { return s == Side::kLeft ? "left" : "right"; }

template <typename T>
T field(const Json& j, const char* name, const char* where) {
  if (!j.contains(name)) throw ValidationError(fmt::format("{}: missing field '{}'", where, name));
  try {
    return j.at(name).get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(fmt::format("{}: field '{}' has the wrong type", where, name));
  }
}

}  // namespace

CropPolicy CropPolicy::parse(const std::string& text) {
  if (text == "full") return CropPolicy{};
  constexpr std::string_view kPrefix = "center_crop:";
  if (text.rfind(kPrefix, 0) == 0) {
    const std::string n = text.substr(kPrefix.size());
    if (!n.empty() && n.size() < 7 && std::all_of(n.begin(), n.end(), ::isdigit)) {
      const int v = std::stoi(n);
      if (v > 0) return CropPolicy{v};
    }
  }
  throw ValidationError("crop_policy must be 'full' or 'center_crop:N' with N > 0, got '" + text + "'");
}

std::string CropPolicy::to_string() const {
  return center_crop > 0 ? "center_crop:" + std::to_string(center_crop) : "full";
}

StudyManifest parse_study_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                                   bool check_files) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("manifest must be a JSON object");
  StudyManifest m;
  m.study_id = field<std::string>(j, "study_id", "manifest");
  require_id(m.study_id, "study_id");
  if (j.contains("min_raters_per_pair")) m.min_raters_per_pair = field<int>(j, "min_raters_per_pair", "manifest");
  if (m.min_raters_per_pair < 1) throw ValidationError("min_raters_per_pair must be at least 1");
  if (j.contains("crop_policy")) m.crop_policy = CropPolicy::parse(field<std::string>(j, "crop_policy", "manifest"));
  if (j.contains("seed")) m.seed = field<std::uint64_t>(j, "seed", "manifest");
  if (j.contains("lease_seconds")) {
    const double s = field<double>(j, "lease_seconds", "manifest");
    if (!(s > 0 && s < 1e9)) throw ValidationError("lease_seconds must be positive");
    m.lease_ms = std::llround(s * 1000);
  }
  const Json contents = field<Json>(j, "contents", "manifest");
  if (!contents.is_array() || contents.empty()) throw ValidationError("manifest needs a non-empty 'contents' array");
  std::set<std::string> content_ids;
  for (const auto& c : contents) {
    StudyContent sc;
    sc.content_id = field<std::string>(c, "content_id", "content");
    require_id(sc.content_id, "content_id");
    if (!content_ids.insert(sc.content_id).second) {
      throw ValidationError("duplicate content_id '" + sc.content_id + "'");
    }
    const Json items = field<Json>(c, "items", "content");
    if (!items.is_array() || items.size() < 2) {
      throw ValidationError("content '" + sc.content_id + "' needs at least 2 items");
    }
    std::set<std::string> item_ids;
    for (const auto& it : items) {
      StudyItem si;
      si.item_id = field<std::string>(it, "item_id", "item");
      require_id(si.item_id, "item_id");
      if (!item_ids.insert(si.item_id).second) {
        throw ValidationError("duplicate item_id '" + si.item_id + "' in content '" + sc.content_id + "'");
      }
      si.path = field<std::string>(it, "path", "item");
      if (si.path.is_relative()) si.path = base_dir / si.path;
      si.path = si.path.lexically_normal();
      if (check_files && !std::filesystem::is_regular_file(si.path)) {
        throw ValidationError("image for " + sc.content_id + "/" + si.item_id + " not found: " + si.path.string());
      }
      sc.items.push_back(std::move(si));
    }
    m.contents.push_back(std::move(sc));
  }
  return m;
}

std::string study_manifest_json(const StudyManifest& m) {
  Json j;
  j["study_id"] = m.study_id;
  j["min_raters_per_pair"] = m.min_raters_per_pair;
  j["crop_policy"] = m.crop_policy.to_string();
  j["seed"] = m.seed;
  j["lease_seconds"] = static_cast<double>(m.lease_ms) / 1000.0;
  Json contents = Json::array();
  for (const auto& c : m.contents) {
    Json items = Json::array();
    for (const auto& it : c.items) items.push_back(Json{{"item_id", it.item_id}, {"path", it.path.string()}});
    contents.push_back(Json{{"content_id", c.content_id}, {"items", items}});
  }
  j["contents"] = contents;
  return j.dump(2) + "\n";
}

// assignment_seed travels as a decimal string so that JavaScript clients do
// not round it to a double.
std::string record_to_json(const ComparisonRecord& r) {
  Json j;
  j["record_id"] = r.record_id;
  j["study_id"] = r.study_id;
  j["rater_id"] = r.rater_id;
  j["content_id"] = r.content_id;
  j["left_item"] = r.left_item;
  j["right_item"] = r.right_item;
  j["chosen"] = r.chosen ? Json(side_name(*r.chosen)) : Json(nullptr);
  j["assignment_seed"] = std::to_string(r.assignment_seed);
  j["issued_at"] = r.issued_at;
  j["answered_at"] = r.answered_at ? Json(*r.answered_at) : Json(nullptr);
  return j.dump();
}

ComparisonRecord record_from_json(const std::string& line) {
  try {
    const Json j = Json::parse(line);
    ComparisonRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.study_id = j.at("study_id").get<std::string>();
    r.rater_id = j.at("rater_id").get<std::string>();
    r.content_id = j.at("content_id").get<std::string>();
    r.left_item = j.at("left_item").get<std::string>();
    r.right_item = j.at("right_item").get<std::string>();
    const auto& chosen = j.at("chosen");
    if (!chosen.is_null()) {
      const auto s = chosen.get<std::string>();
      if (s != "left" && s != "right") throw FormatError("chosen must be left, right or null");
      r.chosen = s == "left" ? Side::kLeft : Side::kRight;
    }
    r.assignment_seed = std::stoull(j.at("assignment_seed").get<std::string>());
    r.issued_at = j.at("issued_at").get<std::int64_t>();
    if (!j.at("answered_at").is_null()) r.answered_at = j.at("answered_at").get<std::int64_t>();
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed study record: ") + e.what());
  } catch (const std::logic_error&) {
    throw FormatError("malformed assignment_seed in study record");
  }
}

Clock system_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

// ---------------------------------------------------------------------------

Study::Study(StudyManifest manifest, const std::vector<std::string>& log_lines) : manifest_(std::move(manifest)) {
  for (std::size_t c = 0; c < manifest_.contents.size(); ++c) {
    const auto& content = manifest_.contents[c];
    content_index_[content.content_id] = c;
    const std::size_t n = content.items.size();
    for (std::size_t i = 0; i < n; ++i) item_index_[content.content_id][content.items[i].item_id] = i;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) pairs_.push_back(Pair{c, a, b, 0, {}, {}});
    }
    wins_.emplace_back(n, std::vector<long>(n, 0));
  }
  for (std::size_t i = 0; i < log_lines.size(); ++i) {
    if (log_lines[i].empty()) continue;
    try {
      apply(record_from_json(log_lines[i]));
    } catch (const Error& e) {
      throw FormatError(fmt::format("study {} log line {}: {}", manifest_.study_id, i + 1, e.what()));
    }
  }
}

std::size_t Study::pair_index(const std::string& content, const std::string& left, const std::string& right) const {
  auto c = item_index_.find(content);
  if (c == item_index_.end()) throw FormatError("unknown content '" + content + "'");
  auto l = c->second.find(left), r = c->second.find(right);
  if (l == c->second.end() || r == c->second.end() || l->second == r->second) {
    throw FormatError("bad item pair (" + left + ", " + right + ")");
  }
  const std::size_t ci = content_index_.at(content);
  const std::size_t a = std::min(l->second, r->second), b = std::max(l->second, r->second);
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    if (pairs_[p].content == ci && pairs_[p].a == a && pairs_[p].b == b) return p;
  }
  throw FormatError("pair not found");
}

int Study::live_leases(const Pair& p, std::int64_t now) const {
  int n = 0;
  for (const auto& [id, issued_at] : p.open) {
    if (now < issued_at + manifest_.lease_ms) ++n;
  }
  return n;
}

Assignment Study::next_pair(const std::string& rater_id, std::int64_t now, ComparisonRecord* issued) const {
  require_id(rater_id, "rater id");
  Assignment out;
  const bool complete = std::all_of(pairs_.begin(), pairs_.end(),
                                    [&](const Pair& p) { return p.coverage >= manifest_.min_raters_per_pair; });
  if (complete) {
    out.done = true;
    return out;
  }
  const auto seen_it = rater_seen_.find(rater_id);
  std::vector<std::size_t> best;
  int best_load = 0;
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    if (seen_it != rater_seen_.end() && seen_it->second[p]) continue;
    const int load = pairs_[p].coverage + live_leases(pairs_[p], now);
    if (best.empty() || load < best_load) {
      best.assign(1, p);
      best_load = load;
    } else if (load == best_load) {
      best.push_back(p);
    }
  }
  if (best.empty()) {
    out.done = true;
    return out;
  }
  // One sub-stream picks the pair, an independent one flips the placement
  // coin, so placement never depends on which items were drawn.
  const std::uint64_t seed = derive_seed(manifest_.seed, issued_count_);
  SplitMix64 pick(derive_seed(seed, 0));
  SplitMix64 coin(derive_seed(seed, 1));
  const Pair& p = pairs_[best[pick.bounded(best.size())]];
  const bool swap = coin.next() >> 63;
  const auto& content = manifest_.contents[p.content];
  ComparisonRecord r;
  r.record_id = fmt::format("r{:06d}", issued_count_ + 1);
  r.study_id = manifest_.study_id;
  r.rater_id = rater_id;
  r.content_id = content.content_id;
  r.left_item = content.items[swap ? p.b : p.a].item_id;
  r.right_item = content.items[swap ? p.a : p.b].item_id;
  r.assignment_seed = seed;
  r.issued_at = now;
  out.record_id = r.record_id;
  out.content_id = r.content_id;
  out.left_item = r.left_item;
  out.right_item = r.right_item;
  out.assignment_seed = seed;
  if (issued) *issued = std::move(r);
  return out;
}

std::optional<ComparisonRecord> Study::prepare_choice(const std::string& record_id, const std::string& rater_id,
                                                      Side chosen, std::int64_t now) const {
  auto it = leases_.find(record_id);
  if (it == leases_.end()) throw UnknownRecord("unknown record '" + record_id + "'");
  const Lease& lease = it->second;
  if (!rater_id.empty() && rater_id != lease.record.rater_id) {
    throw ValidationError("record '" + record_id + "' was issued to a different rater");
  }
  if (lease.answered) return std::nullopt;
  const Pair& p = pairs_[lease.pair];
  if (now >= lease.record.issued_at + manifest_.lease_ms && p.last_issue != record_id) {
    throw StaleRecord("lease of record '" + record_id + "' expired and the pair was reissued");
  }
  ComparisonRecord r = lease.record;
  r.chosen = chosen;
  r.answered_at = now;
  return r;
}

void Study::apply(const ComparisonRecord& r) {
  if (r.study_id != manifest_.study_id) throw FormatError("record belongs to study '" + r.study_id + "'");
  if (!r.chosen) {
    if (leases_.contains(r.record_id)) throw FormatError("record '" + r.record_id + "' issued twice");
    const std::size_t p = pair_index(r.content_id, r.left_item, r.right_item);
    leases_.emplace(r.record_id, Lease{r, p});
    pairs_[p].last_issue = r.record_id;
    pairs_[p].open.emplace_back(r.record_id, r.issued_at);
    auto& seen = rater_seen_[r.rater_id];
    seen.resize(pairs_.size(), 0);
    seen[p] = 1;
    ++issued_count_;
    return;
  }
  auto it = leases_.find(r.record_id);
  if (it == leases_.end()) throw FormatError("answer for unissued record '" + r.record_id + "'");
  Lease& lease = it->second;
  if (lease.answered) return;
  lease.answered = true;
  Pair& p = pairs_[lease.pair];
  ++p.coverage;
  std::erase_if(p.open, [&](const auto& o) { return o.first == r.record_id; });
  const auto& items = item_index_.at(lease.record.content_id);
  const std::size_t l = items.at(lease.record.left_item), rr = items.at(lease.record.right_item);
  if (*r.chosen == Side::kLeft) {
    ++wins_[p.content][l][rr];
  } else {
    ++wins_[p.content][rr][l];
  }
}

StudyStatus Study::status(std::int64_t now) const {
  StudyStatus s;
  s.study_id = manifest_.study_id;
  s.min_raters_per_pair = manifest_.min_raters_per_pair;
  std::size_t done = 0;
  for (const auto& p : pairs_) {
    const auto& c = manifest_.contents[p.content];
    s.pairs.push_back(PairStatus{c.content_id, c.items[p.a].item_id, c.items[p.b].item_id, p.coverage,
                                 live_leases(p, now)});
    if (p.coverage >= manifest_.min_raters_per_pair) ++done;
  }
  s.completion = pairs_.empty() ? 1.0 : static_cast<double>(done) / static_cast<double>(pairs_.size());
  s.complete = done == pairs_.size();
  return s;
}

std::vector<ContentCounts> Study::export_counts() const {
  std::vector<ContentCounts> out;
  for (std::size_t c = 0; c < manifest_.contents.size(); ++c) {
    std::vector<std::string> ids;
    for (const auto& it : manifest_.contents[c].items) ids.push_back(it.item_id);
    ContentCounts cc{manifest_.contents[c].content_id, CountMatrix(ids)};
    cc.counts.wins = wins_[c];
    out.push_back(std::move(cc));
  }
  return out;
}

const ComparisonRecord& Study::issued_record(const std::string& record_id) const {
  auto it = leases_.find(record_id);
  if (it == leases_.end()) throw UnknownRecord("unknown record '" + record_id + "'");
  return it->second.record;
}

// ---------------------------------------------------------------------------

StudyService::StudyService(std::filesystem::path root, Clock clock) : root_(std::move(root)), clock_(std::move(clock)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw IoError("cannot create study root " + root_.string() + ": " + ec.message());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root_)) {
    if (e.is_directory() && std::filesystem::exists(e.path() / "manifest.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    StudyManifest m = parse_study_manifest(read_text_file(dir / "manifest.json"), dir, false);
    std::vector<std::string> lines;
    if (std::filesystem::exists(dir / "log.jsonl")) {
      std::istringstream in(read_text_file(dir / "log.jsonl"));
      for (std::string line; std::getline(in, line);) lines.push_back(line);
    }
    const std::string id = m.study_id;
    studies_.emplace(id, std::make_unique<Study>(std::move(m), lines));
  }
}

Study& StudyService::find(const std::string& id) {
  auto it = studies_.find(id);
  if (it == studies_.end()) throw UnknownStudy("unknown study '" + id + "'");
  return *it->second;
}

const Study& StudyService::find(const std::string& id) const {
  auto it = studies_.find(id);
  if (it == studies_.end()) throw UnknownStudy("unknown study '" + id + "'");
  return *it->second;
}

void StudyService::create_study(const StudyManifest& manifest) {
  require_id(manifest.study_id, "study_id");
  std::unique_lock lock(mutex_);
  const auto dir = root_ / manifest.study_id;
  if (studies_.contains(manifest.study_id) || std::filesystem::exists(dir)) {
    throw ConflictError("study '" + manifest.study_id + "' already exists");
  }
  auto study = std::make_unique<Study>(manifest);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "log.jsonl", "");
  // The manifest goes last: a directory without one is not a study.
  write_text_file(dir / "manifest.json", study_manifest_json(manifest));
  studies_.emplace(manifest.study_id, std::move(study));
}

void StudyService::append(const std::string& study_id, const ComparisonRecord& record) {
  const auto path = root_ / study_id / "log.jsonl";
  const std::string line = record_to_json(record) + "\n";
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  const ssize_t n = ::write(fd, line.data(), line.size());
  const int err = errno;
  const bool synced = n == static_cast<ssize_t>(line.size()) && ::fdatasync(fd) == 0;
  ::close(fd);
  if (!synced) throw IoError("cannot append to " + path.string() + ": " + std::strerror(err));
}

Assignment StudyService::next_pair(const std::string& study_id, const std::string& rater_id) {
  std::unique_lock lock(mutex_);
  Study& s = find(study_id);
  ComparisonRecord issued;
  Assignment a = s.next_pair(rater_id, clock_(), &issued);
  if (!a.done) {
    append(study_id, issued);
    s.apply(issued);
  }
  return a;
}

ChoiceAck StudyService::record_choice(const std::string& study_id, const std::string& record_id,
                                      const std::string& rater_id, Side chosen) {
  std::unique_lock lock(mutex_);
  Study& s = find(study_id);
  const auto record = s.prepare_choice(record_id, rater_id, chosen, clock_());
  if (!record) return ChoiceAck{record_id, true};
  append(study_id, *record);
  s.apply(*record);
  return ChoiceAck{record_id, false};
}

StudyStatus StudyService::status(const std::string& study_id) const {
  std::shared_lock lock(mutex_);
  return find(study_id).status(clock_());
}

std::vector<ContentCounts> StudyService::export_counts(const std::string& study_id) const {
  std::shared_lock lock(mutex_);
  return find(study_id).export_counts();
}

std::vector<std::uint8_t> StudyService::image_png(const std::string& study_id, const std::string& content_id,
                                                  const std::string& item_id) const {
  std::filesystem::path path;
  int crop_size = 0;
  {
    std::shared_lock lock(mutex_);
    const auto& m = find(study_id).manifest();
    for (const auto& c : m.contents) {
      if (c.content_id != content_id) continue;
      for (const auto& it : c.items) {
        if (it.item_id == item_id) path = it.path;
      }
    }
    crop_size = m.crop_policy.center_crop;
  }
  if (path.empty()) throw UnknownRecord("unknown image " + content_id + "/" + item_id);
  ImageBuffer img = load_image(path);
  if (crop_size > 0) img = crop(img, center_crop_rect(img.width(), img.height(), crop_size));
  return encode_png(img);
}

std::vector<std::string> StudyService::study_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : studies_) ids.push_back(id);
  return ids;
}

// ---------------------------------------------------------------------------

std::string status_json(const StudyStatus& s) {
  Json j;
  j["study_id"] = s.study_id;
  j["min_raters_per_pair"] = s.min_raters_per_pair;
  j["completion"] = s.completion;
  j["complete"] = s.complete;
  Json pairs = Json::array();
  for (const auto& p : s.pairs) {
    pairs.push_back(Json{{"content_id", p.content_id},
                         {"item_a", p.item_a},
                         {"item_b", p.item_b},
                         {"coverage", p.coverage},
                         {"in_flight", p.in_flight}});
  }
  j["pairs"] = pairs;
  return j.dump(2) + "\n";
}

std::string counts_json(const std::string& study_id, const std::vector<ContentCounts>& counts) {
  Json j;
  j["study_id"] = study_id;
  Json contents = Json::array();
  for (const auto& c : counts) {
    contents.push_back(Json{{"content_id", c.content_id}, {"items", c.counts.items}, {"wins", c.counts.wins}});
  }
  j["contents"] = contents;
  return j.dump(2) + "\n";
}

std::vector<ContentCounts> counts_from_json(const std::string& json_text) {
  try {
    const Json j = Json::parse(json_text);
    std::vector<ContentCounts> out;
    for (const auto& c : j.at("contents")) {
      ContentCounts cc{c.at("content_id").get<std::string>(),
                       CountMatrix(c.at("items").get<std::vector<std::string>>())};
      cc.counts.wins = c.at("wins").get<std::vector<std::vector<long>>>();
      if (cc.counts.wins.size() != cc.counts.items.size()) throw FormatError("wins matrix does not match items");
      for (const auto& row : cc.counts.wins) {
        if (row.size() != cc.counts.items.size()) throw FormatError("wins matrix is not square");
      }
      out.push_back(std::move(cc));
    }
    return out;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed counts export: ") + e.what());
  }
}

}  // namespace rqi
