#include "edgpat/hierarchy.hpp"

namespace edgpat {

ad::Var gather_adjacent(ad::Tape& tape, const Taxonomy& taxonomy, const MemoryState& mem,
                        int leaf, int level) {
  const int depth = taxonomy.depth();
  if (level < 1 || level >= depth)
    throw NumericError("gather_adjacent: level " + std::to_string(level) + " out of range");

  // Child on the triggering leaf's path: the leaf itself at level L-1,
  // otherwise the chain node one level down.
  ad::Var child;
  if (level == depth - 1) {
    child = tape.constant(mem.leaf_mem.row(leaf).transpose());
  } else {
    int child_interior = taxonomy.interior_index(taxonomy.ancestor_at_level(leaf, level + 1));
    child = tape.constant(mem.node_mem.row(child_interior).transpose());
  }
  if (level == 1) return child;  // roots only hear from below

  int parent_interior = taxonomy.interior_index(taxonomy.ancestor_at_level(leaf, level - 1));
  ad::Var parent = tape.constant(mem.node_mem.row(parent_interior).transpose());
  std::vector<ad::Var> parts{parent, child};
  return tape.concat(parts);
}

NodeMessage encode_node_message(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                                const MemoryState& mem, const EventItem& item, int leaf,
                                int level) {
  const int node_idx = taxonomy.ancestor_at_level(leaf, level);
  const int interior = taxonomy.interior_index(node_idx);
  ad::Var adjacent = gather_adjacent(tape, taxonomy, mem, leaf, level);
  ad::Var own = tape.constant(mem.node_mem.row(interior).transpose());
  ad::Var gap = encode_gap(tape, params, item.timestamp, mem.last_seen_node(interior));
  std::vector<ad::Var> parts{adjacent, own, gap};
  ad::Var payload = params.msg_node[level - 1].apply(tape, tape.concat(parts));
  return NodeMessage{interior, Message{node_idx, payload, item.timestamp}};
}

std::vector<NodeMessage> encode_item_node_messages(ad::Tape& tape, ModelParams& params,
                                                   const Taxonomy& taxonomy,
                                                   const MemoryState& mem,
                                                   const EventItem& item) {
  std::vector<NodeMessage> msgs;
  if (params.ablations().hmp) return msgs;
  const int depth = taxonomy.depth();
  msgs.reserve(item.codes.size() * (depth - 1));
  for (int leaf : item.codes)
    for (int level = depth - 1; level >= 1; --level)
      msgs.push_back(encode_node_message(tape, params, taxonomy, mem, item, leaf, level));
  return msgs;
}

ad::Var update_node(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                    MemoryState& mem, const NodeMessage& msg) {
  const int level = taxonomy.node(taxonomy.interior_node(msg.interior)).level;
  ad::Var state = tape.constant(mem.node_mem.row(msg.interior).transpose());
  ad::Var next = params.gru_node[level - 1].step(tape, msg.message.payload, state);
  mem.node_mem.row(msg.interior) = tape.value(next).transpose();
  mem.last_seen_node(msg.interior) = msg.message.event_time;
  return next;
}

}  // namespace edgpat
