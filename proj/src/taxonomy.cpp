#include "edgpat/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

namespace edgpat {

Taxonomy Taxonomy::build(const std::vector<std::tuple<std::string, std::string, int>>& entries) {
  Taxonomy t;
  t.nodes_.reserve(entries.size());
  for (const auto& [id, parent, level] : entries) {
    if (id.empty()) throw DataError("taxonomy: empty node id");
    if (level < 1) throw DataError("taxonomy: node '" + id + "' has level " + std::to_string(level));
    if (t.index_.count(id)) throw DataError("taxonomy: duplicate node id '" + id + "'");
    t.index_.emplace(id, static_cast<int>(t.nodes_.size()));
    t.nodes_.push_back(Node{id, level, -1});
    t.depth_ = std::max(t.depth_, level);
  }
  if (t.nodes_.empty()) throw DataError("taxonomy: no nodes");

  // Resolve parents; the level-gap rule (parent exactly one level up) rules
  // out cycles as a side effect.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [id, parent_id, level] = entries[i];
    Node& node = t.nodes_[i];
    if (level == 1) {
      if (!parent_id.empty())
        throw DataError("taxonomy: level-1 node '" + id + "' must not have a parent");
      continue;
    }
    if (parent_id.empty())
      throw DataError("taxonomy: node '" + id + "' at level " + std::to_string(level) +
                      " has no parent");
    auto it = t.index_.find(parent_id);
    if (it == t.index_.end())
      throw DataError("taxonomy: node '" + id + "' references unknown parent '" + parent_id + "'");
    int parent_level = t.nodes_[it->second].level;
    if (parent_level != level - 1)
      throw DataError("taxonomy: node '" + id + "' at level " + std::to_string(level) +
                      " has parent '" + parent_id + "' at level " + std::to_string(parent_level));
    node.parent = it->second;
  }

  t.by_level_.assign(t.depth_, {});
  for (int i = 0; i < t.num_nodes(); ++i) t.by_level_[t.nodes_[i].level - 1].push_back(i);
  for (auto& level_nodes : t.by_level_)
    std::sort(level_nodes.begin(), level_nodes.end(),
              [&](int a, int b) { return t.nodes_[a].id < t.nodes_[b].id; });

  t.level_position_.assign(t.num_nodes(), -1);
  for (const auto& level_nodes : t.by_level_)
    for (int pos = 0; pos < static_cast<int>(level_nodes.size()); ++pos)
      t.level_position_[level_nodes[pos]] = pos;

  t.leaves_ = t.by_level_[t.depth_ - 1];
  if (t.leaves_.empty()) throw DataError("taxonomy: no leaves at level " + std::to_string(t.depth_));

  t.leaf_of_node_.assign(t.num_nodes(), -1);
  for (int leaf = 0; leaf < t.num_leaves(); ++leaf) t.leaf_of_node_[t.leaves_[leaf]] = leaf;

  t.interior_of_node_.assign(t.num_nodes(), -1);
  for (int level = 1; level < t.depth_; ++level)
    for (int node_idx : t.by_level_[level - 1]) {
      t.interior_of_node_[node_idx] = static_cast<int>(t.interior_nodes_.size());
      t.interior_nodes_.push_back(node_idx);
    }
  t.num_interior_ = static_cast<int>(t.interior_nodes_.size());

  t.chains_.resize(t.num_leaves());
  for (int leaf = 0; leaf < t.num_leaves(); ++leaf) {
    std::vector<int>& chain = t.chains_[leaf];
    chain.assign(t.depth_ - 1, -1);
    int cur = t.nodes_[t.leaves_[leaf]].parent;
    for (int level = t.depth_ - 1; level >= 1; --level) {
      if (cur < 0)
        throw DataError("taxonomy: leaf '" + t.leaf_id(leaf) + "' has a broken ancestor chain");
      chain[level - 1] = cur;
      cur = t.nodes_[cur].parent;
    }
  }
  return t;
}

int Taxonomy::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

int Taxonomy::leaf_index(const std::string& id) const {
  int node_idx = find(id);
  return node_idx < 0 ? -1 : leaf_of_node_[node_idx];
}

int Taxonomy::ancestor_at_level(int leaf, int level) const {
  if (level == depth_) return leaves_[leaf];
  return chains_[leaf][level - 1];
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

Taxonomy load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("taxonomy: cannot open '" + path + "'");

  std::vector<std::tuple<std::string, std::string, int>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw DataError("taxonomy: " + path + ":" + std::to_string(line_no) +
                      ": expected 3 fields, got " + std::to_string(fields.size()));
    int level = 0;
    if (!parse_int(fields[2], level)) {
      if (line_no == 1) continue;  // header
      throw DataError("taxonomy: " + path + ":" + std::to_string(line_no) +
                      ": level is not an integer: '" + fields[2] + "'");
    }
    entries.emplace_back(fields[0], fields[1], level);
  }
  return Taxonomy::build(entries);
}

}  // namespace edgpat
