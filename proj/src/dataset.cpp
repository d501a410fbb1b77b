#include "edgpat/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

namespace edgpat {

namespace {

using nlohmann::json;

RawEvent parse_record(const json& j, std::size_t line_no, const std::string& path) {
  auto fail = [&](const std::string& what) -> DataError {
    return DataError("events: " + path + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!j.is_object()) throw fail("record is not an object");
  RawEvent rec;
  try {
    rec.patent_id = j.at("patent_id").get<std::string>();
    rec.companies = j.at("companies").get<std::vector<std::string>>();
    rec.codes = j.at("codes").get<std::vector<std::string>>();
    rec.timestamp = j.at("timestamp").get<double>();
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  if (rec.companies.empty()) throw fail("companies must be nonempty");
  if (rec.codes.empty()) throw fail("codes must be nonempty");
  if (!(rec.timestamp > 0) || !std::isfinite(rec.timestamp)) throw fail("timestamp must be > 0");
  return rec;
}

}  // namespace

Dataset build_dataset(std::vector<RawEvent> records, std::shared_ptr<const Taxonomy> taxonomy) {
  if (!taxonomy) throw ConfigError("dataset: null taxonomy");

  // Intern companies in sorted-id order so index order equals id order.
  std::set<std::string> company_ids;
  for (const auto& rec : records)
    for (const auto& id : rec.companies) company_ids.insert(id);

  Dataset ds;
  ds.taxonomy = std::move(taxonomy);
  ds.companies.assign(company_ids.begin(), company_ids.end());
  for (int i = 0; i < ds.num_companies(); ++i) ds.company_index.emplace(ds.companies[i], i);

  ds.events.reserve(records.size());
  for (auto& rec : records) {
    Event ev;
    ev.patent_id = std::move(rec.patent_id);
    ev.timestamp = rec.timestamp;
    for (const auto& id : rec.companies) ev.companies.push_back(ds.company_index.at(id));
    for (const auto& code : rec.codes) {
      int leaf = ds.taxonomy->leaf_index(code);
      if (leaf < 0)
        throw DataError("events: patent '" + ev.patent_id + "' references code '" + code +
                        "' which is not a level-" + std::to_string(ds.taxonomy->depth()) +
                        " taxonomy node");
      ev.codes.push_back(leaf);
    }
    auto dedup = [](std::vector<int>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedup(ev.companies);
    dedup(ev.codes);
    ds.events.push_back(std::move(ev));
  }

  std::stable_sort(ds.events.begin(), ds.events.end(), [](const Event& a, const Event& b) {
    return std::tie(a.timestamp, a.patent_id) < std::tie(b.timestamp, b.patent_id);
  });
  return ds;
}

Dataset load_events(const std::string& path, std::shared_ptr<const Taxonomy> taxonomy) {
  std::ifstream in(path);
  if (!in) throw DataError("events: cannot open '" + path + "'");

  std::vector<RawEvent> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw DataError("events: " + path + ":" + std::to_string(line_no) + ": malformed JSON");
    records.push_back(parse_record(j, line_no, path));
  }
  return build_dataset(std::move(records), std::move(taxonomy));
}

std::vector<EventItem> split_events(const std::vector<Event>& events) {
  std::vector<EventItem> items;
  std::size_t total = 0;
  for (const auto& ev : events) total += ev.companies.size();
  items.reserve(total);
  for (const auto& ev : events)
    for (int company : ev.companies)  // already sorted ascending
      items.push_back(EventItem{ev.patent_id, company, ev.codes, ev.timestamp});
  return items;
}

Dataset filter_companies(const Dataset& dataset, bool require_all_spans, double year_seconds) {
  const Splits& sp = dataset.require_splits();
  const double last_train_start = sp.train_end - year_seconds;

  const int m = dataset.num_companies();
  std::vector<char> history(m, 0), last_year(m, 0), val_year(m, 0), test_year(m, 0);
  for (const auto& ev : dataset.events) {
    const double t = ev.timestamp;
    std::vector<char>* bucket = nullptr;
    if (t <= last_train_start)
      bucket = &history;
    else if (t <= sp.train_end)
      bucket = &last_year;
    else if (t <= sp.val_end)
      bucket = &val_year;
    else if (t <= sp.test_end)
      bucket = &test_year;
    if (!bucket) continue;
    for (int c : ev.companies) (*bucket)[c] = 1;
  }

  std::vector<char> keep(m, 0);
  for (int c = 0; c < m; ++c) {
    bool spans_ok = require_all_spans ? (last_year[c] && val_year[c] && test_year[c])
                                      : (last_year[c] || val_year[c] || test_year[c]);
    keep[c] = history[c] && spans_ok;
  }

  std::vector<RawEvent> survivors;
  for (const auto& ev : dataset.events) {
    RawEvent rec;
    for (int c : ev.companies)
      if (keep[c]) rec.companies.push_back(dataset.companies[c]);
    if (rec.companies.empty()) continue;  // event only referenced dropped companies
    rec.patent_id = ev.patent_id;
    rec.timestamp = ev.timestamp;
    for (int leaf : ev.codes) rec.codes.push_back(dataset.taxonomy->leaf_id(leaf));
    survivors.push_back(std::move(rec));
  }
  if (survivors.empty())
    throw DataError(
        "filter_companies: no companies survive the split requirements; "
        "widen the splits or relax require_all_spans");

  Dataset out = build_dataset(std::move(survivors), dataset.taxonomy);
  out.splits = dataset.splits;
  return out;
}

std::vector<LabelWindow> build_labels(const Dataset& dataset,
                                      const std::vector<std::pair<int, double>>& anchors,
                                      double window) {
  // Per-company event timeline, in chronological order.
  std::vector<std::vector<const Event*>> timeline(dataset.num_companies());
  for (const auto& ev : dataset.events)
    for (int c : ev.companies) timeline[c].push_back(&ev);

  std::vector<LabelWindow> labels;
  labels.reserve(anchors.size());
  for (const auto& [company, anchor] : anchors) {
    LabelWindow lw;
    lw.company = company;
    lw.anchor_time = anchor;
    lw.window = window;
    std::set<int> positives;
    for (const Event* ev : timeline[company]) {
      if (ev->timestamp <= anchor) continue;
      if (ev->timestamp > anchor + window) break;
      positives.insert(ev->codes.begin(), ev->codes.end());
    }
    lw.positives.assign(positives.begin(), positives.end());
    labels.push_back(std::move(lw));
  }
  return labels;
}

double parse_time_point(const std::string& text) {
  // Epoch seconds first.
  {
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc() && ptr == text.data() + text.size()) return value;
  }
  // ISO date YYYY-MM-DD, midnight UTC.
  int y = 0, mo = 0, d = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%d", &y, &mo, &d) == 3) {
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw ConfigError("invalid date '" + text + "'");
    return static_cast<double>(
        duration_cast<seconds>(sys_days{ymd}.time_since_epoch()).count());
  }
  throw ConfigError("cannot parse time point '" + text + "' (want ISO date or epoch seconds)");
}

Splits make_splits(const std::string& train_end, const std::string& val_end,
                   const std::string& test_end) {
  Splits sp{parse_time_point(train_end), parse_time_point(val_end), parse_time_point(test_end)};
  if (!sp.valid())
    throw ConfigError("splits must be strictly increasing: train_end < val_end < test_end");
  return sp;
}

}  // namespace edgpat
