#pragma once

#include <span>
#include <unordered_map>

#include "edgpat/hierarchy.hpp"

namespace edgpat {

// Tape nodes for every entity updated by one batch, keyed by entity index
// (interior index for taxonomy nodes). Values have already been written
// back to the MemoryState; the vars are kept so a batch loss can reach
// back through the updates.
struct BatchUpdates {
  std::unordered_map<int, ad::Var> companies;
  std::unordered_map<int, ad::Var> leaves;
  std::unordered_map<int, ad::Var> nodes;
};

// Two-phase processing of one chronological slice of items: first every
// message (company, leaf, taxonomy node) is encoded against the pre-batch
// memories, then per-entity aggregates are applied through the GRU
// updaters in ascending entity order. Entities hit by several items in the
// batch receive one aggregated update.
BatchUpdates replay_batch(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                          MemoryState& mem, std::span<const EventItem> items,
                          AggregationMode aggregation = AggregationMode::kMean);

}  // namespace edgpat
