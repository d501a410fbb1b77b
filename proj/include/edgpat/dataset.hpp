#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgpat/taxonomy.hpp"
#include "edgpat/types.hpp"

namespace edgpat {

// Chronological event log over an interned company universe and a shared
// taxonomy. Immutable after construction; safe to share across threads.
struct Dataset {
  std::vector<Event> events;            // sorted by (timestamp, patent_id)
  std::vector<std::string> companies;   // index -> id, sorted ascending
  std::unordered_map<std::string, int> company_index;
  std::shared_ptr<const Taxonomy> taxonomy;
  std::optional<Splits> splits;

  int num_companies() const { return static_cast<int>(companies.size()); }
  int num_leaves() const { return taxonomy->num_leaves(); }
  double start_time() const { return events.empty() ? 0.0 : events.front().timestamp; }

  const Splits& require_splits() const {
    if (!splits) throw ConfigError("dataset: splits not set");
    return *splits;
  }
};

// Record as it appears in the JSONL file, before interning.
struct RawEvent {
  std::string patent_id;
  std::vector<std::string> companies;
  std::vector<std::string> codes;
  double timestamp = 0;
};

// Reads newline-delimited JSON records {patent_id, companies, codes,
// timestamp}. Events come out sorted by timestamp, ties broken by
// patent_id. Codes must name level-L taxonomy nodes; anything else is a
// referential DataError with the line number.
Dataset load_events(const std::string& path, std::shared_ptr<const Taxonomy> taxonomy);

// Same, from already-parsed records (used by the synthesizer and tests).
Dataset build_dataset(std::vector<RawEvent> records, std::shared_ptr<const Taxonomy> taxonomy);

// Expands each event into one item per company, preserving event order;
// items within an event follow sorted company order.
std::vector<EventItem> split_events(const std::vector<Event>& events);

// Drops companies with no activity before the last training year, or --
// when `require_all_spans` (the default) -- missing activity in any of the
// last training year, the validation span, or the test span. With the flag
// off only companies inactive in all three are dropped. Events are
// rewritten to the surviving companies; events left with none are removed.
// `year_seconds` sets the width of the "last training year" lookback.
Dataset filter_companies(const Dataset& dataset, bool require_all_spans = true,
                         double year_seconds = kDefaultWindowSeconds);

// Positives for each (company, anchor): codes of the company's events with
// timestamp in (anchor, anchor + window].
std::vector<LabelWindow> build_labels(const Dataset& dataset,
                                      const std::vector<std::pair<int, double>>& anchors,
                                      double window);

// "2017-01-01" (UTC midnight) or a raw epoch-seconds number.
double parse_time_point(const std::string& text);

Splits make_splits(const std::string& train_end, const std::string& val_end,
                   const std::string& test_end);

}  // namespace edgpat
