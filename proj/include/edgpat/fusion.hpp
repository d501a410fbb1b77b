#pragma once

#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "edgpat/memory.hpp"

namespace edgpat {

// Which leaf codes each company has ever applied for, maintained during
// replay. Drives the three-way branch in the code-representation stage.
class InteractionHistory {
 public:
  explicit InteractionHistory(int companies) : seen_(companies) {}

  void observe(const EventItem& item) {
    seen_[item.company].insert(item.codes.begin(), item.codes.end());
  }
  bool contains(int company, int leaf) const { return seen_[company].count(leaf) > 0; }
  const std::unordered_set<int>& codes_of(int company) const { return seen_[company]; }

 private:
  std::vector<std::unordered_set<int>> seen_;
};

// Per-score-call branch tally; for each leaf exactly one fires.
struct BranchCounts {
  int current = 0;     // in the in-flight event, scored from updated memory
  int historical = 0;  // seen before, scored from the history head
  int fresh = 0;       // never interacted, static embedding only
  int total() const { return current + historical + fresh; }
};

// Inputs that tie a score call to the surrounding replay: which entities
// were updated on this tape (so gradients flow through their updates), the
// current event's codes (gamma branch; null at inference), and dropout.
struct ScoringContext {
  const std::unordered_map<int, ad::Var>* updated_companies = nullptr;
  const std::unordered_map<int, ad::Var>* updated_leaves = nullptr;
  const std::unordered_map<int, ad::Var>* updated_nodes = nullptr;  // by interior index
  const std::vector<int>* current_codes = nullptr;
  double dropout = 0.0;
  Rng* rng = nullptr;
};

// Company preference: head MLP over the gated mix of dynamic memory and
// static embedding. Under sif the static side is zero.
ad::Var company_preference(ad::Tape& tape, ModelParams& params, const MemoryState& mem,
                           int company, const ScoringContext& ctx);

// Predicted representation of one leaf for one company, branching on the
// company's interaction history. Never-interacted leaves come back as the
// static embedding row itself.
ad::Var code_representation(ad::Tape& tape, ModelParams& params, const MemoryState& mem,
                            const InteractionHistory& history, int company, int leaf,
                            const ScoringContext& ctx, BranchCounts* counts = nullptr);

// Level-weighted combination of a leaf representation with its ancestors'
// node memories.
ad::Var hierarchical_mix(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                         const MemoryState& mem, int leaf, ad::Var leaf_repr,
                         const ScoringContext& ctx);

// Logits for every leaf: output head over (company preference + fused code
// representation). Probabilities are sigmoid(logit), always in (0,1).
std::vector<ad::Var> score_logits(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                                  const MemoryState& mem, const InteractionHistory& history,
                                  int company, const ScoringContext& ctx,
                                  BranchCounts* counts = nullptr);

// Value-level convenience: probabilities for every leaf.
Vec score_probabilities(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                        const MemoryState& mem, const InteractionHistory& history, int company,
                        const ScoringContext& ctx, BranchCounts* counts = nullptr);

}  // namespace edgpat
