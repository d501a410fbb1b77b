#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "edgpat/types.hpp"

namespace edgpat {

// Classification-code tree with L levels. Level-1 nodes are roots; every
// node at level l > 1 has exactly one parent at level l-1. Level-L nodes
// are the leaves, i.e. the prediction targets. Leaf indices are contiguous
// 0..n_leaves-1 assigned in sorted-id order; interior nodes (levels
// 1..L-1) get their own contiguous indexing for memory rows.
class Taxonomy {
 public:
  struct Node {
    std::string id;
    int level = 0;
    int parent = -1;  // node index, -1 for level-1 roots
  };

  // Builds and validates. `entries` are (id, parent_id, level) triples;
  // parent_id empty for level-1 nodes. Throws DataError naming the node on
  // duplicate ids, unknown parents, or level gaps.
  static Taxonomy build(const std::vector<std::tuple<std::string, std::string, int>>& entries);

  int depth() const { return depth_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_leaves() const { return static_cast<int>(leaves_.size()); }
  int num_interior() const { return num_interior_; }

  const Node& node(int node_idx) const { return nodes_[node_idx]; }

  // -1 if the id is unknown.
  int find(const std::string& id) const;

  // Leaf index (0..n-1) for a level-L node id; -1 if not a leaf.
  int leaf_index(const std::string& id) const;
  const std::string& leaf_id(int leaf) const { return nodes_[leaves_[leaf]].id; }
  int leaf_node(int leaf) const { return leaves_[leaf]; }

  // Interior memory row for a node index; -1 for leaves.
  int interior_index(int node_idx) const { return interior_of_node_[node_idx]; }
  int interior_node(int interior_idx) const { return interior_nodes_[interior_idx]; }

  // Ancestors of a leaf, one node index per level 1..L-1 (chain[l-1] is the
  // level-l ancestor). Length is always depth()-1.
  const std::vector<int>& chain(int leaf) const { return chains_[leaf]; }

  // Level-l ancestor node index of a leaf; for l == depth() the leaf itself.
  int ancestor_at_level(int leaf, int level) const;

  // Node indices at a given level, sorted by id.
  const std::vector<int>& nodes_at_level(int level) const { return by_level_[level - 1]; }

  // Position of a node among the (id-sorted) nodes of its own level.
  int level_position(int node_idx) const { return level_position_[node_idx]; }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> leaves_;           // node indices of level-L nodes, sorted by id
  std::vector<int> leaf_of_node_;     // node idx -> leaf idx or -1
  std::vector<int> interior_of_node_; // node idx -> interior idx or -1
  std::vector<int> interior_nodes_;   // interior idx -> node idx
  std::vector<std::vector<int>> chains_;
  std::vector<std::vector<int>> by_level_;
  std::vector<int> level_position_;
  int depth_ = 0;
  int num_interior_ = 0;
};

// Reads `node_id,parent_id,level` CSV. A first line whose third field is
// not an integer is treated as a header. Empty parent marks level-1 nodes.
Taxonomy load_taxonomy(const std::string& path);

}  // namespace edgpat
