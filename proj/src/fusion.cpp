#include "edgpat/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace edgpat {

namespace {

ad::Var lookup_or_constant(ad::Tape& tape, const std::unordered_map<int, ad::Var>* updated,
                           int key, const Mat& rows) {
  if (updated) {
    auto it = updated->find(key);
    if (it != updated->end()) return it->second;
  }
  return tape.constant(rows.row(key).transpose());
}

ad::Var apply_head(ad::Tape& tape, Mlp& head, ad::Var x, const ScoringContext& ctx) {
  if (ctx.dropout > 0.0 && ctx.rng) return head.apply_dropout(tape, x, ctx.dropout, *ctx.rng);
  return head.apply(tape, x);
}

}  // namespace

ad::Var company_preference(ad::Tape& tape, ModelParams& params, const MemoryState& mem,
                           int company, const ScoringContext& ctx) {
  ad::Var dynamic = lookup_or_constant(tape, ctx.updated_companies, company, mem.company_mem);
  ad::Var gate = tape.sigmoid(tape.param_scalar(params.gate_company, company));
  ad::Var mixed = tape.smul(gate, dynamic);
  if (!params.ablations().sif) {
    ad::Var anti_gate = tape.axpb(gate, -1.0, 1.0);
    ad::Var static_part = tape.smul(anti_gate, tape.param_row(params.static_company, company));
    mixed = tape.add(mixed, static_part);
  }
  return apply_head(tape, params.company_head, mixed, ctx);
}

ad::Var code_representation(ad::Tape& tape, ModelParams& params, const MemoryState& mem,
                            const InteractionHistory& history, int company, int leaf,
                            const ScoringContext& ctx, BranchCounts* counts) {
  const bool in_current = ctx.current_codes && std::binary_search(ctx.current_codes->begin(),
                                                                  ctx.current_codes->end(), leaf);
  const bool interacted = in_current || history.contains(company, leaf);
  const bool with_static = !params.ablations().sif;

  if (!interacted) {
    if (counts) ++counts->fresh;
    return with_static ? tape.param_row(params.static_leaf, leaf)
                       : tape.zeros(params.dims().d);
  }

  ad::Var dyn;
  if (in_current) {
    if (counts) ++counts->current;
    if (!ctx.updated_leaves || !ctx.updated_leaves->count(leaf))
      throw NumericError("code_representation: current-event leaf has no update on this tape");
    dyn = ctx.updated_leaves->at(leaf);
  } else {
    if (counts) ++counts->historical;
    ad::Var hist_mem = lookup_or_constant(tape, ctx.updated_leaves, leaf, mem.leaf_mem);
    dyn = apply_head(tape, params.history_head, hist_mem, ctx);
  }

  ad::Var gate = tape.sigmoid(tape.param_scalar(params.gate_leaf, leaf));
  ad::Var mixed = tape.smul(gate, dyn);
  if (with_static) {
    ad::Var anti_gate = tape.axpb(gate, -1.0, 1.0);
    mixed = tape.add(mixed, tape.smul(anti_gate, tape.param_row(params.static_leaf, leaf)));
  }
  return mixed;
}

ad::Var hierarchical_mix(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                         const MemoryState& mem, int leaf, ad::Var leaf_repr,
                         const ScoringContext& ctx) {
  const int depth = taxonomy.depth();
  std::vector<ad::Var> terms;
  terms.reserve(depth);
  terms.push_back(tape.smul(tape.param_scalar(params.level_weights, depth - 1), leaf_repr));
  for (int level = 1; level < depth; ++level) {
    int interior = taxonomy.interior_index(taxonomy.ancestor_at_level(leaf, level));
    ad::Var node = lookup_or_constant(tape, ctx.updated_nodes, interior, mem.node_mem);
    terms.push_back(tape.smul(tape.param_scalar(params.level_weights, level - 1), node));
  }
  return tape.sum(terms);
}

std::vector<ad::Var> score_logits(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                                  const MemoryState& mem, const InteractionHistory& history,
                                  int company, const ScoringContext& ctx, BranchCounts* counts) {
  ad::Var preference = company_preference(tape, params, mem, company, ctx);
  std::vector<ad::Var> logits;
  logits.reserve(taxonomy.num_leaves());
  for (int leaf = 0; leaf < taxonomy.num_leaves(); ++leaf) {
    ad::Var repr = code_representation(tape, params, mem, history, company, leaf, ctx, counts);
    ad::Var fused = hierarchical_mix(tape, params, taxonomy, mem, leaf, repr, ctx);
    logits.push_back(apply_head(tape, params.output_head, tape.add(preference, fused), ctx));
  }
  return logits;
}

Vec score_probabilities(ad::Tape& tape, ModelParams& params, const Taxonomy& taxonomy,
                        const MemoryState& mem, const InteractionHistory& history, int company,
                        const ScoringContext& ctx, BranchCounts* counts) {
  auto logits = score_logits(tape, params, taxonomy, mem, history, company, ctx, counts);
  Vec probs(static_cast<Eigen::Index>(logits.size()));
  for (std::size_t j = 0; j < logits.size(); ++j)
    probs(static_cast<Eigen::Index>(j)) = 1.0 / (1.0 + std::exp(-tape.value(logits[j])(0)));
  return probs;
}

}  // namespace edgpat
