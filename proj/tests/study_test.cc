#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <json.hpp>
#include <map>
#include <set>

#include "rqi/error.h"
#include "rqi/stats/thurstone.h"
#include "rqi/study/server.h"
#include "rqi/study/study.h"
#include "rqi/util/file.h"
#include "test_util.h"

using namespace rqi;
using Json = nlohmann::json;

namespace {

// Writes one small PNG per item and returns the manifest JSON text.
std::string make_manifest(const testing::TempDir& dir, const std::string& study_id,
                          const std::vector<std::string>& items, int min_raters, std::uint64_t seed = 1,
                          const std::string& crop = "full", int contents = 1) {
  Json m{{"study_id", study_id},
         {"min_raters_per_pair", min_raters},
         {"crop_policy", crop},
         {"seed", seed},
         {"contents", Json::array()}};
  for (int c = 0; c < contents; ++c) {
    const std::string cid = "img" + std::to_string(c);
    Json entry{{"content_id", cid}, {"items", Json::array()}};
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string file = cid + "_" + items[i] + ".png";
      if (!std::filesystem::exists(dir / file)) {
        ImageBuffer img(40, 30, 3);
        SplitMix64 rng(c * 100 + i);
        for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.bounded(256));
        save_image(img, dir / file);
      }
      entry["items"].push_back({{"item_id", items[i]}, {"path", file}});
    }
    m["contents"].push_back(entry);
  }
  return m.dump();
}

std::vector<std::string> items_n(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("m" + std::to_string(i));
  return out;
}

struct FakeClock {
  std::shared_ptr<std::atomic<std::int64_t>> now = std::make_shared<std::atomic<std::int64_t>>(1'700'000'000'000);
  Clock clock() const {
    auto p = now;
    return [p] { return p->load(); };
  }
  void advance_minutes(double m) { *now += static_cast<std::int64_t>(m * 60'000); }
};

// Answers an issued assignment with a fixed preference: the smaller item id wins.
Side prefer_smaller(const Assignment& a) { return a.left_item < a.right_item ? Side::kLeft : Side::kRight; }

}  // namespace

TEST_CASE("manifest validation") {
  testing::TempDir dir("study");
  const auto ok = make_manifest(dir, "s1", items_n(8), 15);
  const auto m = parse_study_manifest(ok, dir.path());
  CHECK(m.contents.size() == 1);
  CHECK(m.contents[0].items[0].path == dir / "img0_m0.png");
  CHECK(Study(m).pair_count() == 28);

  auto mutate = [&](auto&& fn) {
    Json j = Json::parse(ok);
    fn(j);
    return j.dump();
  };
  CHECK_THROWS_AS(parse_study_manifest(mutate([](Json& j) { j["contents"][0]["items"][1]["item_id"] = "m0"; }),
                                       dir.path()),
                  ValidationError);
  CHECK_THROWS_AS(parse_study_manifest(mutate([](Json& j) { j["contents"].push_back(j["contents"][0]); }),
                                       dir.path()),
                  ValidationError);
  CHECK_THROWS_AS(parse_study_manifest(mutate([](Json& j) { j["contents"][0]["items"] = Json::array({j["contents"][0]["items"][0]}); }),
                                       dir.path()),
                  ValidationError);
  CHECK_THROWS_AS(parse_study_manifest(mutate([](Json& j) { j["contents"][0]["items"][2]["path"] = "missing.png"; }),
                                       dir.path()),
                  ValidationError);
  CHECK_THROWS_AS(parse_study_manifest(mutate([](Json& j) { j["crop_policy"] = "center_crop:0"; }), dir.path()),
                  ValidationError);
  CHECK_THROWS_AS(parse_study_manifest(mutate([](Json& j) { j["study_id"] = "../x"; }), dir.path()),
                  ValidationError);
  CHECK_THROWS_AS(parse_study_manifest(mutate([](Json& j) { j["min_raters_per_pair"] = 0; }), dir.path()),
                  ValidationError);
  CHECK_THROWS_AS(parse_study_manifest("{not json", dir.path()), ValidationError);
  CHECK(parse_study_manifest(mutate([](Json& j) { j["crop_policy"] = "center_crop:16"; }), dir.path())
            .crop_policy.center_crop == 16);
}

TEST_CASE("create_study tracks every unordered pair and rejects re-creation") {
  testing::TempDir dir("study");
  StudyService service(dir / "root");
  service.create_study(parse_study_manifest(make_manifest(dir, "s1", items_n(8), 15), dir.path()));
  const auto status = service.status("s1");
  CHECK(status.pairs.size() == 28);
  CHECK(status.completion == 0.0);
  for (const auto& p : status.pairs) CHECK(p.coverage == 0);
  CHECK_THROWS_AS(service.create_study(parse_study_manifest(make_manifest(dir, "s1", items_n(3), 15), dir.path())),
                  ConflictError);
  CHECK_THROWS_AS(service.status("nope"), UnknownStudy);
  CHECK_THROWS_AS(service.next_pair("nope", "r"), UnknownStudy);
  CHECK_THROWS_AS(service.export_counts("nope"), UnknownStudy);
}

TEST_CASE("record JSON round-trips with the documented fields") {
  ComparisonRecord r{"r000001", "s", "alice", "c", "a", "b", Side::kRight, 0xFFFFFFFFFFFFFFFFull, 5, 9};
  const std::string line = record_to_json(r);
  const Json j = Json::parse(line);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  CHECK(keys == std::vector<std::string>{"answered_at", "assignment_seed", "chosen", "content_id", "issued_at",
                                         "left_item", "rater_id", "record_id", "right_item", "study_id"});
  CHECK(j["assignment_seed"] == "18446744073709551615");
  const auto back = record_from_json(line);
  CHECK(back.assignment_seed == r.assignment_seed);
  CHECK(back.chosen == Side::kRight);
  CHECK(back.answered_at == 9);
  r.chosen.reset();
  r.answered_at.reset();
  CHECK(Json::parse(record_to_json(r))["chosen"].is_null());
  CHECK_THROWS_AS(record_from_json("{\"record_id\": 3}"), FormatError);
}

TEST_CASE("next_pair and record_choice") {
  testing::TempDir dir("study");
  FakeClock clock;
  StudyService service(dir / "root", clock.clock());
  service.create_study(parse_study_manifest(make_manifest(dir, "s", items_n(4), 2), dir.path()));

  const Assignment first = service.next_pair("s", "alice");
  REQUIRE_FALSE(first.done);
  CHECK(first.left_item != first.right_item);
  auto pair_of = [&](const Assignment& a) {
    for (const auto& p : service.status("s").pairs) {
      if ((p.item_a == a.left_item && p.item_b == a.right_item) ||
          (p.item_a == a.right_item && p.item_b == a.left_item)) {
        return p;
      }
    }
    FAIL("pair not found");
    return PairStatus{};
  };
  CHECK(pair_of(first).coverage == 0);
  CHECK(pair_of(first).in_flight == 1);

  SUBCASE("a valid choice increments coverage once, duplicates are acknowledged") {
    CHECK_FALSE(service.record_choice("s", first.record_id, "alice", Side::kLeft).duplicate);
    CHECK(pair_of(first).coverage == 1);
    CHECK(pair_of(first).in_flight == 0);
    CHECK(service.record_choice("s", first.record_id, "alice", Side::kRight).duplicate);
    CHECK(service.record_choice("s", first.record_id, "", Side::kLeft).duplicate);
    CHECK(pair_of(first).coverage == 1);
    const auto counts = service.export_counts("s");
    long total = 0;
    for (const auto& row : counts[0].counts.wins) {
      for (long w : row) total += w;
    }
    CHECK(total == 1);
  }
  SUBCASE("unknown records and foreign raters") {
    CHECK_THROWS_AS(service.record_choice("s", "r999999", "alice", Side::kLeft), UnknownRecord);
    CHECK_THROWS_AS(service.record_choice("s", first.record_id, "bob", Side::kLeft), ValidationError);
  }
  SUBCASE("a rater who saw every pair is done") {
    service.record_choice("s", first.record_id, "alice", Side::kLeft);
    std::set<std::pair<std::string, std::string>> seen{std::minmax(first.left_item, first.right_item)};
    for (int i = 0; i < 5; ++i) {
      const auto a = service.next_pair("s", "alice");
      REQUIRE_FALSE(a.done);
      CHECK(seen.insert(std::minmax(a.left_item, a.right_item)).second);
      service.record_choice("s", a.record_id, "alice", Side::kRight);
    }
    CHECK(service.next_pair("s", "alice").done);
    CHECK_FALSE(service.next_pair("s", "bob").done);
  }
  SUBCASE("least-covered pairs are served first") {
    service.record_choice("s", first.record_id, "alice", Side::kLeft);
    // Five more raters each take one pair: every pair other than the first
    // has load 0 until all are issued.
    std::set<std::pair<std::string, std::string>> issued;
    for (int r = 0; r < 5; ++r) {
      const auto a = service.next_pair("s", "rater" + std::to_string(r));
      CHECK(pair_of(a).coverage == 0);
      CHECK(issued.insert(std::minmax(a.left_item, a.right_item)).second);
    }
    CHECK_FALSE(issued.contains(std::minmax(first.left_item, first.right_item)));
  }
}

TEST_CASE("expired leases return pairs to the pool and late answers go stale") {
  testing::TempDir dir("study");
  FakeClock clock;
  StudyService service(dir / "root", clock.clock());
  service.create_study(parse_study_manifest(make_manifest(dir, "s", {"a", "b"}, 5), dir.path()));

  const auto a1 = service.next_pair("s", "alice");
  CHECK(service.status("s").pairs[0].in_flight == 1);
  clock.advance_minutes(9.9);
  CHECK(service.status("s").pairs[0].in_flight == 1);
  clock.advance_minutes(0.2);
  CHECK(service.status("s").pairs[0].in_flight == 0);

  SUBCASE("late answer accepted while the pair was not reissued") {
    CHECK_FALSE(service.record_choice("s", a1.record_id, "alice", Side::kLeft).duplicate);
    CHECK(service.status("s").pairs[0].coverage == 1);
  }
  SUBCASE("late answer after reissue is stale") {
    const auto b1 = service.next_pair("s", "bob");
    REQUIRE_FALSE(b1.done);
    CHECK_THROWS_AS(service.record_choice("s", a1.record_id, "alice", Side::kLeft), StaleRecord);
    CHECK(service.status("s").pairs[0].coverage == 0);
    CHECK_FALSE(service.record_choice("s", b1.record_id, "bob", Side::kLeft).duplicate);
  }
}

TEST_CASE("placement coin is fair for a fixed pair") {
  testing::TempDir dir("study");
  auto m = parse_study_manifest(make_manifest(dir, "s", {"a", "b"}, 100000, 77), dir.path());
  Study study(m);
  int left_a = 0;
  for (int r = 0; r < 500; ++r) {
    ComparisonRecord rec;
    const auto a = study.next_pair("r" + std::to_string(r), 1000, &rec);
    REQUIRE_FALSE(a.done);
    study.apply(rec);
    if (a.left_item == "a") ++left_a;
  }
  // 99% binomial interval around 250 for n = 500: 250 +- 2.576 * sqrt(125).
  const double half = 2.5758293035489 * std::sqrt(500 * 0.25);
  CHECK(left_a >= 250 - half);
  CHECK(left_a <= 250 + half);
}

TEST_CASE("no rater receives the same unordered pair twice over 10^4 assignments") {
  testing::TempDir dir("study");
  auto m = parse_study_manifest(make_manifest(dir, "s", items_n(8), 300, 5, "full", 2), dir.path());
  m.lease_ms = 1000;
  Study study(m);
  SplitMix64 rng(3);
  std::map<std::string, std::set<std::tuple<std::string, std::string, std::string>>> seen;
  std::int64_t now = 0;
  int assignments = 0;
  while (assignments < 10000) {
    const std::string rater = "r" + std::to_string(rng.bounded(250));
    ComparisonRecord rec;
    const auto a = study.next_pair(rater, now, &rec);
    now += 37;
    if (a.done) continue;
    study.apply(rec);
    ++assignments;
    CHECK(seen[rater].insert({a.content_id, std::min(a.left_item, a.right_item), std::max(a.left_item, a.right_item)})
              .second);
    // Abandon one assignment in ten; answer the rest.
    if (rng.bounded(10) != 0) {
      const auto ans = study.prepare_choice(a.record_id, rater, prefer_smaller(a), now);
      REQUIRE(ans.has_value());
      study.apply(*ans);
    }
  }
}

TEST_CASE("exported counts match a simulated rater's own tally") {
  testing::TempDir dir("study");
  FakeClock clock;
  StudyService service(dir / "root", clock.clock());
  service.create_study(parse_study_manifest(make_manifest(dir, "s", items_n(5), 3, 9, "full", 2), dir.path()));

  for (const auto& c : service.export_counts("s")) {
    for (const auto& row : c.counts.wins) {
      for (long w : row) CHECK(w == 0);
    }
  }
  CHECK(service.status("s").completion == 0.0);

  std::map<std::string, std::map<std::pair<std::string, std::string>, long>> tally;  // content -> (winner, loser)
  std::map<std::string, std::map<std::pair<std::string, std::string>, long>> answered;
  for (int r = 0; r < 4; ++r) {
    for (;;) {
      const auto a = service.next_pair("s", "rater" + std::to_string(r));
      if (a.done) break;
      const Side s = prefer_smaller(a);
      const auto& winner = s == Side::kLeft ? a.left_item : a.right_item;
      const auto& loser = s == Side::kLeft ? a.right_item : a.left_item;
      service.record_choice("s", a.record_id, "", s);
      ++tally[a.content_id][{winner, loser}];
      ++answered[a.content_id][std::minmax(a.left_item, a.right_item)];
    }
  }
  const auto status = service.status("s");
  CHECK(status.complete);
  CHECK(status.completion == 1.0);
  for (const auto& p : status.pairs) CHECK(p.coverage >= 3);
  for (const auto& c : service.export_counts("s")) {
    const auto& ids = c.counts.items;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (i == j) continue;
        CHECK(c.counts.wins[i][j] == tally[c.content_id][{ids[i], ids[j]}]);
        CHECK(c.counts.total(i, j) == answered[c.content_id][std::minmax(ids[i], ids[j])]);
      }
    }
  }
}

TEST_CASE("replaying the log reproduces counters, leases and future assignments") {
  testing::TempDir dir("study");
  FakeClock clock;
  std::string status_before, export_before;
  std::vector<Assignment> next_before;
  {
    StudyService service(dir / "root", clock.clock());
    service.create_study(parse_study_manifest(make_manifest(dir, "s", items_n(6), 4, 21, "full", 2), dir.path()));
    SplitMix64 rng(8);
    for (int i = 0; i < 60; ++i) {
      const std::string rater = "r" + std::to_string(rng.bounded(6));
      const auto a = service.next_pair("s", rater);
      clock.advance_minutes(0.5);
      if (a.done || rng.bounded(5) == 0) continue;  // some leases stay open
      service.record_choice("s", a.record_id, rater, rng.bounded(2) ? Side::kLeft : Side::kRight);
      if (rng.bounded(4) == 0) service.record_choice("s", a.record_id, rater, Side::kLeft);  // duplicate post
    }
    status_before = status_json(service.status("s"));
    export_before = counts_json("s", service.export_counts("s"));
    // Two services over copies of the same state must continue identically.
    std::filesystem::copy(dir / "root", dir / "copy", std::filesystem::copy_options::recursive);
    for (int r = 0; r < 6; ++r) next_before.push_back(service.next_pair("s", "r" + std::to_string(r)));
  }
  StudyService replayed(dir / "copy", clock.clock());
  CHECK(status_json(replayed.status("s")) == status_before);
  CHECK(counts_json("s", replayed.export_counts("s")) == export_before);
  for (int r = 0; r < 6; ++r) {
    const auto a = replayed.next_pair("s", "r" + std::to_string(r));
    CHECK(a.done == next_before[r].done);
    CHECK(a.record_id == next_before[r].record_id);
    CHECK(a.left_item == next_before[r].left_item);
    CHECK(a.right_item == next_before[r].right_item);
    CHECK(a.assignment_seed == next_before[r].assignment_seed);
  }
  // The log itself is one JSON record per line.
  const auto bytes = read_file_bytes(dir / "root" / "s" / "log.jsonl");
  std::istringstream lines(std::string(bytes.begin(), bytes.end()));
  int n = 0;
  for (std::string line; std::getline(lines, line); ++n) CHECK_NOTHROW(record_from_json(line));
  CHECK(n > 60);

  write_text_file(dir / "copy" / "s" / "log.jsonl", "{\"garbage\": true}\n");
  CHECK_THROWS_AS(StudyService(dir / "copy", clock.clock()), FormatError);
}

TEST_CASE("HTTP endpoints map errors and serve a scripted study to completion") {
  testing::TempDir dir("study");
  FakeClock clock;
  StudyService service(dir / "root", clock.clock());
  StudyServer server(service, dir.path());
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  httplib::Client http("127.0.0.1", port);

  // Strict preference d > c > b > a; items are listed in a different order.
  const std::vector<std::string> items{"b", "d", "a", "c"};
  const std::map<std::string, int> quality{{"a", 0}, {"b", 1}, {"c", 2}, {"d", 3}};
  const auto manifest = make_manifest(dir, "live", items, 3, 4, "center_crop:16");

  auto created = http.Post("/studies", manifest, "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(Json::parse(created->body)["pairs"] == 6);
  auto again = http.Post("/studies", manifest, "application/json");
  CHECK(again->status == 409);
  CHECK(Json::parse(again->body)["error"] == "ConflictError");
  CHECK(http.Post("/studies", "{", "application/json")->status == 400);
  CHECK(http.Get("/studies/none/status")->status == 404);
  CHECK(http.Get("/studies/live/next")->status == 400);
  CHECK(Json::parse(http.Get("/studies")->body)["studies"] == Json::array({"live"}));

  int posted = 0, duplicates = 0;
  std::map<std::string, int> left_counts;
  for (bool progress = true; progress;) {
    progress = false;
    for (const std::string rater : {"u1", "u2", "u3"}) {
      auto res = http.Get("/studies/live/next?rater=" + rater);
      REQUIRE(res);
      REQUIRE(res->status == 200);
      const Json a = Json::parse(res->body);
      if (a["done"]) continue;
      progress = true;
      const std::string left_url = a["left_image"], right_url = a["right_image"];
      auto img = http.Get(left_url);
      REQUIRE(img->status == 200);
      const auto decoded = decode_image(std::span<const std::uint8_t>(
          reinterpret_cast<const std::uint8_t*>(img->body.data()), img->body.size()));
      CHECK(decoded.width() == 16);
      CHECK(decoded.height() == 16);
      auto item_of = [](const std::string& url) {
        const auto start = url.find("/images/") + 8;
        return url.substr(start, url.find('?') - start);
      };
      const std::string left = item_of(left_url), right = item_of(right_url);
      ++left_counts[left];
      const std::string chosen = quality.at(left) > quality.at(right) ? "left" : "right";
      const Json body{{"record_id", a["record_id"]}, {"rater_id", rater}, {"chosen", chosen}};
      for (int rep = 0; rep < 2; ++rep) {
        auto ack = http.Post("/studies/live/choices", body.dump(), "application/json");
        REQUIRE(ack->status == 200);
        if (Json::parse(ack->body)["duplicate"]) ++duplicates;
      }
      ++posted;
    }
  }
  CHECK(posted == 18);  // 3 raters x 6 pairs
  CHECK(duplicates == 18);
  const Json status = Json::parse(http.Get("/studies/live/status")->body);
  CHECK(status["complete"] == true);
  for (const auto& p : status["pairs"]) CHECK(p["coverage"] == 3);

  const auto counts = counts_from_json(http.Get("/studies/live/export")->body);
  REQUIRE(counts.size() == 1);
  const auto scale = thurstone_scale(counts[0].counts);
  std::vector<std::pair<double, std::string>> order;
  for (std::size_t i = 0; i < scale.items.size(); ++i) order.emplace_back(scale.scores[i], scale.items[i]);
  std::sort(order.begin(), order.end());
  CHECK(order[0].second == "a");
  CHECK(order[1].second == "b");
  CHECK(order[2].second == "c");
  CHECK(order[3].second == "d");

  // Error mapping for choices.
  CHECK(http.Post("/studies/live/choices", "{\"record_id\": \"r999\", \"chosen\": \"left\"}", "application/json")
            ->status == 404);
  CHECK(http.Post("/studies/live/choices", "{\"record_id\": \"r000001\", \"chosen\": \"up\"}", "application/json")
            ->status == 400);
  CHECK(http.Get("/studies/live/images/zz?content=img0")->status == 404);
  CHECK(http.Get("/studies/live/images/a")->status == 400);

  // Stale lease through HTTP: a fresh two-item study.
  REQUIRE(http.Post("/studies", make_manifest(dir, "stale", {"x", "y"}, 5), "application/json")->status == 201);
  const Json first = Json::parse(http.Get("/studies/stale/next?rater=p")->body);
  clock.advance_minutes(11);
  const Json second = Json::parse(http.Get("/studies/stale/next?rater=q")->body);
  CHECK(second["done"] == false);
  auto stale = http.Post("/studies/stale/choices",
                         Json{{"record_id", first["record_id"]}, {"chosen", "left"}}.dump(), "application/json");
  CHECK(stale->status == 410);
  CHECK(Json::parse(stale->body)["error"] == "StaleRecord");
  server.stop();
}
