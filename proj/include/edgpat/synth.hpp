#pragma once

#include <cstdint>

#include "edgpat/dataset.hpp"

namespace edgpat {

// Planted-preference corpus generator. Each company samples codes from a
// small set of favourite taxonomy subtrees; the favourites drift once over
// the timeline, so a company's recent behaviour predicts its future better
// than its all-time frequencies. Per-company subtree choices are spread
// uniformly, which keeps a single global ranking uninformative.
struct SynthConfig {
  int companies = 20;
  std::vector<int> branching = {2, 5, 5};  // roots, then children per node per level
  int start_year = 2012;
  int years = 5;                 // last year = test span, one before = validation
  int events_per_company = 100;  // spread evenly across years
  long total_events = 0;         // when > 0, overrides events_per_company
  double concentration = 1.0;    // subtree-choice sharpness; +inf = top subtree only
  int subtrees_per_company = 3;
  int pref_level = 2;            // taxonomy level whose subtrees carry preferences
  double drift_point = 0.5;      // fraction of the span where preferences move
  double drift_width = 0.3;
  double coapply_prob = 0.1;     // chance of a second applicant on an event
  double noise = 0.05;           // chance a code ignores the preference entirely
  int max_codes_per_event = 3;
  // Within a favourite subtree each company weights leaves geometrically
  // (decay^position over a per-company shuffle); 1.0 means uniform.
  double leaf_decay = 0.55;

  void validate() const;
};

struct SynthResult {
  Dataset dataset;         // splits set to the last two year boundaries
  std::string truth_json;  // planted preferences, for diagnostics
};

// Uniform-branching taxonomy: branching[0] roots, each level-l node gets
// branching[l] children. Ids are zero-padded so id order equals index
// order.
Taxonomy make_taxonomy(const std::vector<int>& branching);

// Taxonomy with an exact node count per level; children are distributed
// as evenly as possible over the previous level.
Taxonomy make_taxonomy_with_counts(const std::vector<long>& counts_per_level);

SynthResult synthesize(const SynthConfig& config, std::uint64_t seed);

// JSONL / CSV writers matching the loaders' formats.
void write_events_jsonl(const Dataset& dataset, const std::string& path);
void write_taxonomy_csv(const Taxonomy& taxonomy, const std::string& path);

}  // namespace edgpat
