// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations of the retrieval metrics, written
// against the definitions rather than the library code: ranks come from
// pairwise counting, not sorting, and the DCG sums run over candidates
// instead of rank positions. Used to cross-check mcavd::rank_candidates,
// mcavd::ndcg and the aggregation.

#pragma once

#include <cmath>
#include <vector>

namespace metric_oracle {

// rank via pair counting; ties broken by original index
inline std::vector<int> ranks(const std::vector<float>& scores) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int ahead = 0;
    for (int j = 0; j < n; ++j) {
      if (scores[static_cast<size_t>(j)] > scores[static_cast<size_t>(i)]) ++ahead;
      else if (scores[static_cast<size_t>(j)] == scores[static_cast<size_t>(i)] && j < i) ++ahead;
    }
    out[static_cast<size_t>(i)] = ahead + 1;
  }
  return out;
}

inline double ndcg(const std::vector<int>& ranks, const std::vector<float>& relevance) {
  const int n = static_cast<int>(ranks.size());
  int k = 0;
  for (float r : relevance)
    if (r > 0.0f) ++k;
  if (k == 0) return 0.0;

  double dcg = 0.0;
  for (int i = 0; i < n; ++i)
    if (ranks[static_cast<size_t>(i)] <= k)
      dcg += relevance[static_cast<size_t>(i)] / std::log2(1.0 + ranks[static_cast<size_t>(i)]);

  // ideal DCG from the relevance multiset: repeatedly take the largest
  std::vector<float> pool = relevance;
  double idcg = 0.0;
  for (int r = 1; r <= k; ++r) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(pool.size()); ++i)
      if (pool[static_cast<size_t>(i)] > pool[static_cast<size_t>(best)]) best = i;
    idcg += pool[static_cast<size_t>(best)] / std::log2(1.0 + r);
    pool.erase(pool.begin() + best);
  }
  return dcg / idcg;
}

struct Aggregate {
  double ndcg = 0, mrr = 0, r1 = 0, r5 = 0, r10 = 0, mean_rank = 0;
};

inline Aggregate aggregate(const std::vector<int>& gt_ranks,
                           const std::vector<double>& ndcg_values) {
  Aggregate a;
  for (int r : gt_ranks) {
    a.mrr += 1.0 / r;
    a.r1 += r <= 1 ? 1 : 0;
    a.r5 += r <= 5 ? 1 : 0;
    a.r10 += r <= 10 ? 1 : 0;
    a.mean_rank += r;
  }
  const double n = static_cast<double>(gt_ranks.size());
  a.mrr /= n;
  a.r1 /= n;
  a.r5 /= n;
  a.r10 /= n;
  a.mean_rank /= n;
  for (double v : ndcg_values) a.ndcg += v;
  if (!ndcg_values.empty()) a.ndcg /= static_cast<double>(ndcg_values.size());
  return a;
}

} // namespace metric_oracle
