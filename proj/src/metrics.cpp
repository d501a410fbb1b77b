#include "edgpat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace edgpat {

RankedPrediction make_ranked(int company, Vec scores, int k_max) {
  RankedPrediction pred;
  pred.company = company;
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  order.resize(std::min(k_max, n));
  pred.scores = std::move(scores);
  pred.topk = std::move(order);
  return pred;
}

namespace {

bool in_truth(std::span<const int> truth, int leaf) {
  return std::binary_search(truth.begin(), truth.end(), leaf);
}

// Lists shorter than K are fine when they already cover every target
// (K is then effectively the target count); a truncated prefix is a bug.
int effective_k(const RankedPrediction& pred, int k) {
  if (k < 1) throw ConfigError("metrics: K must be >= 1");
  if (static_cast<std::size_t>(k) <= pred.topk.size()) return k;
  if (pred.topk.size() == static_cast<std::size_t>(pred.scores.size()))
    return static_cast<int>(pred.topk.size());
  throw ConfigError("metrics: K exceeds the ranked prefix length");
}

}  // namespace

double recall_at_k(const RankedPrediction& pred, std::span<const int> truth, int k) {
  const int kk = effective_k(pred, k);
  if (truth.empty()) throw NumericError("recall_at_k: empty truth set");
  int hits = 0;
  for (int i = 0; i < kk; ++i) hits += in_truth(truth, pred.topk[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double ndcg_at_k(const RankedPrediction& pred, std::span<const int> truth, int k) {
  const int kk = effective_k(pred, k);
  if (truth.empty()) throw NumericError("ndcg_at_k: empty truth set");
  double dcg = 0;
  for (int i = 0; i < kk; ++i)
    if (in_truth(truth, pred.topk[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double ideal = 0;
  const int ideal_hits = std::min<int>(k, static_cast<int>(truth.size()));
  for (int i = 0; i < ideal_hits; ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / ideal;
}

double phr_at_k(std::span<const RankedPrediction> preds,
                std::span<const std::vector<int>> truths, int k) {
  if (preds.size() != truths.size()) throw ConfigError("phr_at_k: misaligned inputs");
  if (preds.empty()) throw NumericError("phr_at_k: no companies to evaluate");
  int companies_hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int kk = effective_k(preds[i], k);
    bool hit = false;
    for (int j = 0; j < kk && !hit; ++j) hit = in_truth(truths[i], preds[i].topk[j]);
    companies_hit += hit ? 1 : 0;
  }
  return static_cast<double>(companies_hit) / static_cast<double>(preds.size());
}

MetricReport evaluate_rankings(std::span<const RankedPrediction> preds,
                               std::span<const std::vector<int>> truths,
                               std::span<const int> ks) {
  if (preds.size() != truths.size()) throw ConfigError("evaluate_rankings: misaligned inputs");

  std::vector<RankedPrediction> kept_preds;
  std::vector<std::vector<int>> kept_truths;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (truths[i].empty()) continue;  // no target window activity: excluded, not zero
    kept_preds.push_back(preds[i]);
    kept_truths.push_back(truths[i]);
  }

  MetricReport report;
  report.ks.assign(ks.begin(), ks.end());
  report.companies_evaluated = static_cast<int>(kept_preds.size());
  if (kept_preds.empty()) throw NumericError("evaluate_rankings: every truth set is empty");

  for (int k : ks) {
    double recall_sum = 0, ndcg_sum = 0;
    for (std::size_t i = 0; i < kept_preds.size(); ++i) {
      recall_sum += recall_at_k(kept_preds[i], kept_truths[i], k);
      ndcg_sum += ndcg_at_k(kept_preds[i], kept_truths[i], k);
    }
    report.recall[k] = recall_sum / static_cast<double>(kept_preds.size());
    report.ndcg[k] = ndcg_sum / static_cast<double>(kept_preds.size());
    report.phr[k] = phr_at_k(kept_preds, kept_truths, k);
  }
  return report;
}

Vec top_frequency_scores(const std::vector<Event>& events, int num_leaves) {
  Vec counts = Vec::Zero(num_leaves);
  for (const Event& ev : events)
    for (int leaf : ev.codes) counts(leaf) += 1.0;
  return counts;
}

Vec personal_top_scores(const std::vector<Event>& events, int company, int num_leaves) {
  Vec personal = Vec::Zero(num_leaves);
  Vec global = top_frequency_scores(events, num_leaves);
  for (const Event& ev : events) {
    if (!std::binary_search(ev.companies.begin(), ev.companies.end(), company)) continue;
    for (int leaf : ev.codes) personal(leaf) += 1.0;
  }

  // Codes the company used rank by integer count (equal counts fall back
  // to leaf index). Unused codes get sub-unit scores encoding the global
  // ordering, so they append below every used code, most-frequent first.
  std::vector<int> order(num_leaves);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&global](int a, int b) {
    if (global(a) != global(b)) return global(a) > global(b);
    return a < b;
  });
  Vec scores = personal;
  for (int pos = 0; pos < num_leaves; ++pos) {
    int leaf = order[pos];
    if (personal(leaf) == 0.0)
      scores(leaf) = static_cast<double>(num_leaves - pos) /
                     (static_cast<double>(num_leaves) + 2.0);
  }
  return scores;
}

}  // namespace edgpat
