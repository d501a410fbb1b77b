#include "edgpat/replay.hpp"

#include <algorithm>
#include <map>
#include <vector>

namespace edgpat {

BatchUpdates replay_batch(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                          MemoryState& mem, std::span<const EventItem> items,
                          AggregationMode aggregation) {
  // Ordered maps keep the update phase deterministic.
  std::map<int, std::vector<Message>> company_msgs;
  std::map<int, std::vector<Message>> leaf_msgs;
  std::map<int, std::vector<Message>> node_msgs;  // by interior index

  // Encode phase: everything reads pre-batch memories only.
  for (const EventItem& item : items) {
    company_msgs[item.company].push_back(encode_company_message(tape, params, mem, item));
    for (int leaf : item.codes) {
      ad::Var parent_mem;
      if (!params.ablations().hmp) {
        int parent = taxonomy.ancestor_at_level(leaf, taxonomy.depth() - 1);
        parent_mem = tape.constant(mem.node_mem.row(taxonomy.interior_index(parent)).transpose());
      }
      leaf_msgs[leaf].push_back(encode_leaf_message(tape, params, mem, item, leaf, parent_mem));
    }
    for (NodeMessage& nm : encode_item_node_messages(tape, params, taxonomy, mem, item))
      node_msgs[nm.interior].push_back(nm.message);
  }

  // Update phase.
  BatchUpdates updates;
  for (auto& [company, msgs] : company_msgs) {
    Message agg = aggregate_messages(tape, msgs, aggregation);
    updates.companies.emplace(company, update_company(tape, params, mem, agg));
  }
  for (auto& [leaf, msgs] : leaf_msgs) {
    Message agg = aggregate_messages(tape, msgs, aggregation);
    updates.leaves.emplace(leaf, update_leaf(tape, params, mem, agg));
  }
  for (auto& [interior, msgs] : node_msgs) {
    Message agg = aggregate_messages(tape, msgs, aggregation);
    updates.nodes.emplace(interior, update_node(tape, params, taxonomy, mem,
                                                NodeMessage{interior, agg}));
  }
  return updates;
}

}  // namespace edgpat
