#pragma once

#include <vector>

#include "edgpat/memory.hpp"

namespace edgpat {

// Taxonomy-node message passing. Each leaf event sends one message to
// every ancestor on its chain; a node at level l reads the pre-batch
// memories of its neighbours on that chain (parent at l-1, child at l+1,
// where the level-L "child" is the leaf itself and the top level has no
// parent), its own memory, and its interval encoding.

// Identifies one ancestor update triggered by a leaf. Node messages are
// grouped per interior node before updating, like all other targets.
struct NodeMessage {
  int interior = -1;  // interior index of the node
  Message message;
};

// Parent-and-child (or child-only at level 1) adjacent memories for the
// level-`level` ancestor of `leaf`. Throws if the node is not on the
// leaf's chain.
ad::Var gather_adjacent(ad::Tape& tape, const Taxonomy& taxonomy, const MemoryState& mem,
                        int leaf, int level);

// Message for the level-`level` ancestor of `leaf` at the item time.
NodeMessage encode_node_message(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                                const MemoryState& mem, const EventItem& item, int leaf,
                                int level);

// All ancestor messages for one item, bottom-up (level L-1 first) per
// leaf. Returns nothing under the hmp ablation.
std::vector<NodeMessage> encode_item_node_messages(ad::Tape& tape, ModelParams& params,
                                                   const Taxonomy& taxonomy,
                                                   const MemoryState& mem, const EventItem& item);

// Per-level GRU update; writes value and last-seen into `mem`.
ad::Var update_node(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                    MemoryState& mem, const NodeMessage& msg);

}  // namespace edgpat
