// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcavd/data.hpp"

namespace mcavd {

class DialogModel;

/// Descending-score ranks, 1-based; ranks[i] is the rank of candidate i.
/// Ties break by ascending original index.
std::vector<int> rank_candidates(const std::vector<float>& scores);

/// NDCG at cutoff K = number of nonzero-relevance candidates, linear gain,
/// log2(1 + rank) discount; 0 when every relevance is zero.
double ndcg(const std::vector<int>& ranks, const std::vector<float>& relevance);

struct SingleGtMetrics {
  double mrr_term = 0.0;
  int r1 = 0, r5 = 0, r10 = 0;
  int rank = 0;
};

SingleGtMetrics single_gt_metrics(int gt_rank, int n_candidates);

/// Aggregated retrieval metrics. NDCG averages over rounds that carry dense
/// annotations; the single-GT metrics average over every evaluated round.
struct MetricsReport {
  double ndcg = 0.0;
  double mrr = 0.0;
  double r1 = 0.0, r5 = 0.0, r10 = 0.0;
  double mean_rank = 0.0;
  int64_t ndcg_rounds = 0;
  int64_t gt_rounds = 0;

  bool has_ndcg() const { return ndcg_rounds > 0; }
  std::string to_json() const;
  /// Aligned text table in Table-1 column order (NDCG, MRR, R@1, R@5, R@10,
  /// Mean), retrieval metrics on the conventional x100 scale.
  std::string to_table() const;
};

class MetricsAccumulator {
public:
  void add_gt(int gt_rank, int n_candidates);
  void add_ndcg(double value);
  MetricsReport report() const;

private:
  double mrr_sum_ = 0.0, rank_sum_ = 0.0, ndcg_sum_ = 0.0;
  int64_t r1_ = 0, r5_ = 0, r10_ = 0;
  int64_t gt_rounds_ = 0, ndcg_rounds_ = 0;
};

struct EvalOptions {
  /// Restrict evaluation to these (dialog index, round index) pairs.
  const std::vector<std::pair<int, int>>* subset = nullptr;
  /// Rounds without a dense annotation contribute one-hot ground-truth
  /// relevance to NDCG (used by the trainer's tracked metric, where NDCG
  /// then reduces to R@1 on unannotated rounds).
  bool impute_gt_relevance = false;
  /// Overrides the model config's caption flag for history construction.
  std::optional<bool> include_caption;
};

MetricsReport evaluate(const DialogModel& model, const DialogCorpus& corpus,
                       const FeatureStore& features,
                       const std::vector<DenseAnnotation>* dense = nullptr,
                       const EvalOptions& opts = {});

} // namespace mcavd
