#pragma once

#include <map>
#include <span>
#include <vector>

#include "edgpat/types.hpp"

namespace edgpat {

// One company's scored ranking over all prediction targets. `topk` holds
// the best `k_max` target indices by descending score, ties broken by
// ascending index.
struct RankedPrediction {
  int company = -1;
  Vec scores;
  std::vector<int> topk;
};

RankedPrediction make_ranked(int company, Vec scores, int k_max);

// |top-K ∩ truth| / |truth|. Truth must be nonempty and sorted.
double recall_at_k(const RankedPrediction& pred, std::span<const int> truth, int k);

// DCG over the top K positions, normalized by the ideal DCG of
// min(K, |truth|) hits.
double ndcg_at_k(const RankedPrediction& pred, std::span<const int> truth, int k);

// Fraction of companies with at least one hit in their top K. Pairs with
// empty truth must be excluded by the caller.
double phr_at_k(std::span<const RankedPrediction> preds,
                std::span<const std::vector<int>> truths, int k);

struct MetricReport {
  std::vector<int> ks;
  std::map<int, double> recall;
  std::map<int, double> ndcg;
  std::map<int, double> phr;
  int companies_evaluated = 0;
};

// Averages the per-company metrics over all pairs with nonempty truth.
MetricReport evaluate_rankings(std::span<const RankedPrediction> preds,
                               std::span<const std::vector<int>> truths,
                               std::span<const int> ks);

// Global code-frequency scores over the given events (one count per
// patent per code). The same ranking serves every company.
Vec top_frequency_scores(const std::vector<Event>& events, int num_leaves);

// Per-company frequency scores; codes the company never used order by the
// global frequency ranking below all used ones. Companies without events
// degrade to the global ranking.
Vec personal_top_scores(const std::vector<Event>& events, int company, int num_leaves);

}  // namespace edgpat
