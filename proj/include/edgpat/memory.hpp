#pragma once

#include <span>

#include "edgpat/model.hpp"
#include "edgpat/types.hpp"

namespace edgpat {

// Per-entity memorable representations plus the time each entity last
// participated in an event. Rows: companies (m x d), leaf codes (n x d),
// interior taxonomy nodes (levels 1..L-1). All memories start at zero;
// last-seen times start at the corpus start so the first interval an
// entity observes is "time since the log began".
struct MemoryState {
  Mat company_mem;
  Mat leaf_mem;
  Mat node_mem;
  Vec last_seen_company;
  Vec last_seen_leaf;
  Vec last_seen_node;
  double init_time = 0;

  MemoryState() = default;
  MemoryState(int companies, int leaves, int interior, int d, double start_time) {
    reset(companies, leaves, interior, d, start_time);
  }

  void reset(int companies, int leaves, int interior, int d, double start_time) {
    company_mem = Mat::Zero(companies, d);
    leaf_mem = Mat::Zero(leaves, d);
    node_mem = Mat::Zero(interior, d);
    last_seen_company = Vec::Constant(companies, start_time);
    last_seen_leaf = Vec::Constant(leaves, start_time);
    last_seen_node = Vec::Constant(interior, start_time);
    init_time = start_time;
  }

  bool same_values(const MemoryState& other) const {
    return company_mem == other.company_mem && leaf_mem == other.leaf_mem &&
           node_mem == other.node_mem && last_seen_company == other.last_seen_company &&
           last_seen_leaf == other.last_seen_leaf && last_seen_node == other.last_seen_node;
  }
};

// Encoded update for one entity. Payload lives on the tape so gradients
// can flow from the batch loss back into the encoders.
struct Message {
  int target = -1;
  ad::Var payload;
  double event_time = 0;
};

// Mean of the (pre-batch) memories of the given leaf codes.
ad::Var integrate_codes(ad::Tape& tape, const MemoryState& mem, std::span<const int> codes);

// Interval encoding for an entity's gap since its last event, in days.
// Returns a zero vector under the tie ablation.
ad::Var encode_gap(ad::Tape& tape, ModelParams& params, double event_time, double last_seen);

// Company message: [codes-mean | own memory | interval]. Under mi the
// codes-mean slot is zeroed.
Message encode_company_message(ad::Tape& tape, ModelParams& params, const MemoryState& mem,
                               const EventItem& item);

// Leaf message: [company memory | own memory | interval | parent memory].
// Under mi the company slot is zeroed; under hmp the parent slot is absent.
Message encode_leaf_message(ad::Tape& tape, ModelParams& params, const MemoryState& mem,
                            const EventItem& item, int leaf, ad::Var parent_mem);

// How simultaneous messages to one entity combine within a batch.
enum class AggregationMode { kMean, kLatest };

// Mean payload (or the latest by event time), event_time = max.
Message aggregate_messages(ad::Tape& tape, std::span<const Message> msgs,
                           AggregationMode mode = AggregationMode::kMean);

// GRU update against the entity's pre-batch memory; writes the new value
// and last-seen time into `mem` and returns the tape node for scoring.
ad::Var update_company(ad::Tape& tape, ModelParams& params, MemoryState& mem, const Message& msg);
ad::Var update_leaf(ad::Tape& tape, ModelParams& params, MemoryState& mem, const Message& msg);

}  // namespace edgpat
