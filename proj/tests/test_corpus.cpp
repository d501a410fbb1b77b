#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "edgpat/dataset.hpp"
#include "edgpat/rng.hpp"
#include "edgpat/synth.hpp"

using namespace edgpat;

namespace {

std::shared_ptr<const Taxonomy> tiny_taxonomy() {
  // Two roots, four leaves at level 3.
  return std::make_shared<const Taxonomy>(make_taxonomy({2, 1, 2}));
}

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

RawEvent raw(const std::string& id, std::vector<std::string> companies,
             std::vector<std::string> codes, double t) {
  return RawEvent{id, std::move(companies), std::move(codes), t};
}

}  // namespace

TEST_CASE("taxonomy: single chain") {
  Taxonomy t = Taxonomy::build({{"a", "", 1}, {"b", "a", 2}, {"c", "b", 3},
                                {"d", "c", 4}, {"e", "d", 5}});
  CHECK(t.depth() == 5);
  CHECK(t.num_leaves() == 1);
  CHECK(t.leaf_index("e") == 0);
  const auto& chain = t.chain(0);
  REQUIRE(chain.size() == 4);
  CHECK(t.node(chain[0]).id == "a");
  CHECK(t.node(chain[3]).id == "d");
}

TEST_CASE("taxonomy: level gap and duplicate ids rejected") {
  CHECK_THROWS_WITH_AS(
      Taxonomy::build({{"a", "", 1}, {"c", "a", 3}}),
      doctest::Contains("'c'"), DataError);
  CHECK_THROWS_AS(Taxonomy::build({{"a", "", 1}, {"a", "", 1}}), DataError);
  CHECK_THROWS_AS(Taxonomy::build({{"a", "", 1}, {"b", "zzz", 2}}), DataError);
  CHECK_THROWS_AS(Taxonomy::build({{"a", "x", 1}}), DataError);
}

TEST_CASE("taxonomy: csv loader with header and blank parents") {
  std::string path = temp_file("edgpat_tax_test.csv");
  {
    std::ofstream out(path);
    out << "node_id,parent_id,level\n";
    out << "r,,1\n";
    out << "m,r,2\n";
    out << "x,m,3\n";
    out << "y,m,3\n";
  }
  Taxonomy t = load_taxonomy(path);
  CHECK(t.depth() == 3);
  CHECK(t.num_leaves() == 2);
  CHECK(t.leaf_index("x") == 0);
  CHECK(t.leaf_index("y") == 1);
  std::remove(path.c_str());
}

TEST_CASE("taxonomy: exact per-level counts at full scale") {
  // Mirrors an L=5 registry with 8 top-level sections and 60,082 leaves.
  Taxonomy t = make_taxonomy_with_counts({8, 124, 1204, 10049, 60082});
  CHECK(t.depth() == 5);
  CHECK(t.num_leaves() == 60082);
  CHECK(t.nodes_at_level(1).size() == 8);
  CHECK(t.nodes_at_level(4).size() == 10049);
  CHECK(t.num_interior() == 8 + 124 + 1204 + 10049);
  // Spot-check chain integrity on the last leaf.
  const auto& chain = t.chain(60081);
  CHECK(chain.size() == 4);
  for (std::size_t i = 1; i < chain.size(); ++i)
    CHECK(t.node(chain[i]).parent == chain[i - 1]);
}

TEST_CASE("events: chronological sort with patent-id tie break") {
  auto tax = tiny_taxonomy();
  auto ds = build_dataset({raw("p3", {"u1"}, {"n3_000000"}, 5),
                           raw("p2", {"u1"}, {"n3_000001"}, 2),
                           raw("p1", {"u2"}, {"n3_000002"}, 2)},
                          tax);
  REQUIRE(ds.events.size() == 3);
  CHECK(ds.events[0].patent_id == "p1");
  CHECK(ds.events[1].patent_id == "p2");
  CHECK(ds.events[2].patent_id == "p3");
  CHECK(ds.events[0].timestamp == 2);
}

TEST_CASE("events: loader rejects malformed and invalid records") {
  auto tax = tiny_taxonomy();
  std::string path = temp_file("edgpat_events_test.jsonl");

  auto write_and_load = [&](const std::string& line) {
    std::ofstream out(path);
    out << line << "\n";
    out.close();
    return load_events(path, tax);
  };

  CHECK_THROWS_WITH_AS(write_and_load("{not json"), doctest::Contains(":1"), DataError);
  CHECK_THROWS_AS(
      write_and_load(R"({"patent_id":"p","companies":["u"],"codes":[],"timestamp":3})"),
      DataError);
  CHECK_THROWS_AS(
      write_and_load(R"({"patent_id":"p","companies":[],"codes":["n3_000000"],"timestamp":3})"),
      DataError);
  CHECK_THROWS_AS(
      write_and_load(R"({"patent_id":"p","companies":["u"],"codes":["n3_000000"],"timestamp":0})"),
      DataError);
  // Interior node used as a code: referential error.
  CHECK_THROWS_AS(
      write_and_load(R"({"patent_id":"p","companies":["u"],"codes":["n2_000000"],"timestamp":3})"),
      DataError);
  CHECK_THROWS_AS(
      write_and_load(R"({"patent_id":"p","companies":["u"],"codes":["nope"],"timestamp":3})"),
      DataError);

  Dataset ok = write_and_load(
      R"({"patent_id":"p","companies":["u2","u1"],"codes":["n3_000001"],"timestamp":3.5})");
  CHECK(ok.events.size() == 1);
  CHECK(ok.companies == std::vector<std::string>{"u1", "u2"});
  std::remove(path.c_str());
}

TEST_CASE("split_events: one item per company, sorted within an event") {
  auto tax = tiny_taxonomy();
  auto ds = build_dataset({raw("pA", {"u3", "u1", "u2"}, {"n3_000000"}, 10),
                           raw("pB", {"u9"}, {"n3_000001"}, 11)},
                          tax);
  auto items = split_events(ds.events);
  REQUIRE(items.size() == 4);
  CHECK(items[0].patent_id == "pA");
  CHECK(ds.companies[items[0].company] == "u1");
  CHECK(ds.companies[items[1].company] == "u2");
  CHECK(ds.companies[items[2].company] == "u3");
  CHECK(items[3].patent_id == "pB");
  CHECK(items[0].codes == items[1].codes);
}

TEST_CASE("split_events: regrouping by patent reconstructs the events") {
  SynthConfig cfg;
  cfg.companies = 8;
  cfg.events_per_company = 30;
  cfg.coapply_prob = 0.4;
  Dataset ds = synthesize(cfg, 99).dataset;
  auto items = split_events(ds.events);

  std::map<std::string, std::set<int>> regrouped;
  std::map<std::string, std::set<int>> codes_seen;
  for (const auto& item : items) {
    regrouped[item.patent_id].insert(item.company);
    codes_seen[item.patent_id].insert(item.codes.begin(), item.codes.end());
  }
  CHECK(regrouped.size() == ds.events.size());
  for (const Event& ev : ds.events) {
    std::set<int> expect_companies(ev.companies.begin(), ev.companies.end());
    std::set<int> expect_codes(ev.codes.begin(), ev.codes.end());
    CHECK(regrouped.at(ev.patent_id) == expect_companies);
    CHECK(codes_seen.at(ev.patent_id) == expect_codes);
  }
}

namespace {

Dataset filter_fixture() {
  auto tax = tiny_taxonomy();
  const double year = 365.0 * 86400.0;
  // Splits: train ends at 10y, val at 11y, test at 12y (year = 365 d).
  std::vector<RawEvent> records;
  auto add = [&](const std::string& company, double t) {
    records.push_back(raw("p" + company + std::to_string(static_cast<long>(t)), {company},
                          {"n3_000000"}, t));
  };
  // u_keep: history + last train year + val + test.
  add("u_keep", 1 * year);
  add("u_keep", 9.5 * year);
  add("u_keep", 10.5 * year);
  add("u_keep", 11.5 * year);
  // u_late: first event in the validation year.
  add("u_late", 10.5 * year);
  add("u_late", 11.5 * year);
  // u_stale: active every span except the test year.
  add("u_stale", 2 * year);
  add("u_stale", 9.5 * year);
  add("u_stale", 10.5 * year);
  // u_gap: history but missing the last training year.
  add("u_gap", 2 * year);
  add("u_gap", 10.5 * year);
  add("u_gap", 11.5 * year);
  Dataset ds = build_dataset(std::move(records), tax);
  ds.splits = Splits{10 * year, 11 * year, 12 * year};
  return ds;
}

}  // namespace

TEST_CASE("filter_companies: activity requirements") {
  Dataset ds = filter_fixture();
  Dataset kept = filter_companies(ds);
  CHECK(kept.companies == std::vector<std::string>{"u_keep"});

  // Lenient mode: any of the three spans is enough.
  Dataset lenient = filter_companies(ds, /*require_all_spans=*/false);
  CHECK(lenient.companies == std::vector<std::string>{"u_gap", "u_keep", "u_stale"});

  // Idempotent under a second pass.
  Dataset twice = filter_companies(kept);
  CHECK(twice.companies == kept.companies);
  CHECK(twice.events.size() == kept.events.size());
}

TEST_CASE("filter_companies: mixed events keep surviving companies only") {
  auto tax = tiny_taxonomy();
  const double year = 365.0 * 86400.0;
  std::vector<RawEvent> records;
  for (double t : {1.0, 9.5, 10.5, 11.5})
    records.push_back(raw("pk" + std::to_string(t), {"u_keep"}, {"n3_000000"}, t * year));
  records.push_back(raw("mixed", {"u_keep", "u_late"}, {"n3_000001"}, 9.6 * year));
  records.push_back(raw("only_dropped", {"u_late"}, {"n3_000001"}, 10.4 * year));
  Dataset ds = build_dataset(std::move(records), tax);
  ds.splits = Splits{10 * year, 11 * year, 12 * year};

  Dataset kept = filter_companies(ds);
  CHECK(kept.companies == std::vector<std::string>{"u_keep"});
  bool found_mixed = false, found_dropped = false;
  for (const Event& ev : kept.events) {
    if (ev.patent_id == "mixed") {
      found_mixed = true;
      CHECK(ev.companies.size() == 1);
    }
    if (ev.patent_id == "only_dropped") found_dropped = true;
  }
  CHECK(found_mixed);
  CHECK_FALSE(found_dropped);
}

TEST_CASE("filter_companies: empty survivor set is an error") {
  auto tax = tiny_taxonomy();
  Dataset ds = build_dataset({raw("p1", {"u"}, {"n3_000000"}, 5.0)}, tax);
  ds.splits = Splits{10, 20, 30};
  CHECK_THROWS_WITH_AS(filter_companies(ds), doctest::Contains("widen"), DataError);
}

TEST_CASE("build_labels: window membership") {
  auto tax = tiny_taxonomy();
  auto ds = build_dataset({raw("p1", {"u"}, {"n3_000000"}, 10),
                           raw("p2", {"u"}, {"n3_000001"}, 400)},
                          tax);
  auto labels = build_labels(ds, {{0, 10.0}}, kDefaultWindowSeconds);
  REQUIRE(labels.size() == 1);
  CHECK(labels[0].positives == std::vector<int>{1});  // p1 itself is at the anchor, excluded

  auto after = build_labels(ds, {{0, 500.0}}, kDefaultWindowSeconds);
  CHECK(after[0].positives.empty());

  // The window is half-open: (anchor, anchor + W].
  CHECK(build_labels(ds, {{0, 10.0}}, 389.0)[0].positives.empty());
  CHECK(build_labels(ds, {{0, 10.0}}, 390.0)[0].positives == std::vector<int>{1});
}

TEST_CASE("build_labels: agrees with a brute-force scan on synthetic data") {
  SynthConfig cfg;
  cfg.companies = 12;
  cfg.events_per_company = 40;
  Dataset ds = synthesize(cfg, 4242).dataset;

  Rng rng(7);
  const double window = 200.0 * 86400.0;
  std::vector<std::pair<int, double>> anchors;
  for (int i = 0; i < 1000; ++i) {
    int company = rng.index(ds.num_companies());
    double t0 = ds.events.front().timestamp;
    double t1 = ds.events.back().timestamp;
    anchors.emplace_back(company, rng.uniform(t0 - window, t1 + window));
  }
  auto labels = build_labels(ds, anchors, window);

  for (std::size_t i = 0; i < anchors.size(); ++i) {
    // Independent oracle: linear scan over every event.
    std::set<int> expect;
    for (const Event& ev : ds.events) {
      if (!(ev.timestamp > anchors[i].second && ev.timestamp <= anchors[i].second + window))
        continue;
      if (!std::binary_search(ev.companies.begin(), ev.companies.end(), anchors[i].first))
        continue;
      expect.insert(ev.codes.begin(), ev.codes.end());
    }
    CHECK(labels[i].positives == std::vector<int>(expect.begin(), expect.end()));
  }
}

TEST_CASE("splits: iso dates and epoch seconds") {
  CHECK(parse_time_point("0") == 0.0);
  CHECK(parse_time_point("1483228800") == 1483228800.0);
  CHECK(parse_time_point("2017-01-01") == 1483228800.0);
  CHECK_THROWS_AS(parse_time_point("not-a-date"), ConfigError);
  CHECK_THROWS_AS(parse_time_point("2017-13-01"), ConfigError);

  Splits sp = make_splits("2015-01-01", "2016-01-01", "2017-01-01");
  CHECK(sp.valid());
  CHECK_THROWS_AS(make_splits("2017-01-01", "2016-01-01", "2018-01-01"), ConfigError);
}

TEST_CASE("dataset: split boundaries partition events") {
  SynthConfig cfg;
  cfg.companies = 6;
  cfg.events_per_company = 30;
  Dataset ds = synthesize(cfg, 1).dataset;
  const Splits& sp = ds.require_splits();
  long counted = 0;
  for (std::size_t i = 1; i < ds.events.size(); ++i)
    CHECK(ds.events[i - 1].timestamp <= ds.events[i].timestamp);
  for (const Event& ev : ds.events) {
    int buckets = 0;
    if (ev.timestamp <= sp.train_end) ++buckets;
    if (ev.timestamp > sp.train_end && ev.timestamp <= sp.val_end) ++buckets;
    if (ev.timestamp > sp.val_end && ev.timestamp <= sp.test_end) ++buckets;
    CHECK(buckets == 1);
    counted += buckets;
  }
  CHECK(counted == static_cast<long>(ds.events.size()));
}
