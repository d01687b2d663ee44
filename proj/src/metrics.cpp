// SPDX-License-Identifier: Apache-2.0

#include "mcavd/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mcavd/model.hpp"

namespace mcavd {

std::vector<int> rank_candidates(const std::vector<float>& scores) {
  for (float s : scores)
    if (std::isnan(s)) throw ValueError("rank_candidates: NaN score");
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  std::vector<int> ranks(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) ranks[static_cast<size_t>(order[static_cast<size_t>(r)])] = r + 1;
  return ranks;
}

double ndcg(const std::vector<int>& ranks, const std::vector<float>& relevance) {
  if (ranks.size() != relevance.size())
    throw ShapeError("ndcg: " + std::to_string(ranks.size()) + " ranks vs " +
                     std::to_string(relevance.size()) + " relevance values");
  int k = 0;
  for (float r : relevance) {
    if (r < 0.0f) throw ValueError("ndcg: negative relevance " + std::to_string(r));
    if (r > 0.0f) ++k;
  }
  if (k == 0) return 0.0;

  const int n = static_cast<int>(ranks.size());
  std::vector<float> by_rank(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) by_rank[static_cast<size_t>(ranks[static_cast<size_t>(i)]) - 1] =
      relevance[static_cast<size_t>(i)];
  double dcg = 0.0;
  for (int r = 1; r <= k; ++r) dcg += by_rank[static_cast<size_t>(r) - 1] / std::log2(1.0 + r);

  std::vector<float> ideal = relevance;
  std::sort(ideal.begin(), ideal.end(), std::greater<float>());
  double idcg = 0.0;
  for (int r = 1; r <= k; ++r) idcg += ideal[static_cast<size_t>(r) - 1] / std::log2(1.0 + r);
  return dcg / idcg;
}

SingleGtMetrics single_gt_metrics(int gt_rank, int n_candidates) {
  if (gt_rank < 1 || gt_rank > n_candidates)
    throw ValueError("gt rank " + std::to_string(gt_rank) + " outside [1, " +
                     std::to_string(n_candidates) + "]");
  SingleGtMetrics m;
  m.mrr_term = 1.0 / gt_rank;
  m.r1 = gt_rank <= 1;
  m.r5 = gt_rank <= 5;
  m.r10 = gt_rank <= 10;
  m.rank = gt_rank;
  return m;
}

void MetricsAccumulator::add_gt(int gt_rank, int n_candidates) {
  const SingleGtMetrics m = single_gt_metrics(gt_rank, n_candidates);
  mrr_sum_ += m.mrr_term;
  rank_sum_ += m.rank;
  r1_ += m.r1;
  r5_ += m.r5;
  r10_ += m.r10;
  ++gt_rounds_;
}

void MetricsAccumulator::add_ndcg(double value) {
  ndcg_sum_ += value;
  ++ndcg_rounds_;
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.gt_rounds = gt_rounds_;
  r.ndcg_rounds = ndcg_rounds_;
  if (gt_rounds_ > 0) {
    const double n = static_cast<double>(gt_rounds_);
    r.mrr = mrr_sum_ / n;
    r.r1 = static_cast<double>(r1_) / n;
    r.r5 = static_cast<double>(r5_) / n;
    r.r10 = static_cast<double>(r10_) / n;
    r.mean_rank = rank_sum_ / n;
  }
  if (ndcg_rounds_ > 0) r.ndcg = ndcg_sum_ / static_cast<double>(ndcg_rounds_);
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  if (has_ndcg()) j["ndcg"] = ndcg;
  j["mrr"] = mrr;
  j["r1"] = r1;
  j["r5"] = r5;
  j["r10"] = r10;
  j["mean_rank"] = mean_rank;
  j["gt_rounds"] = gt_rounds;
  j["ndcg_rounds"] = ndcg_rounds;
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  char header[128], row[160];
  std::snprintf(header, sizeof(header), "%8s %8s %8s %8s %8s %8s", "NDCG", "MRR", "R@1", "R@5",
                "R@10", "Mean");
  if (has_ndcg()) {
    std::snprintf(row, sizeof(row), "%8.2f %8.2f %8.2f %8.2f %8.2f %8.2f", 100.0 * ndcg,
                  100.0 * mrr, 100.0 * r1, 100.0 * r5, 100.0 * r10, mean_rank);
  } else {
    std::snprintf(row, sizeof(row), "%8s %8.2f %8.2f %8.2f %8.2f %8.2f", "-", 100.0 * mrr,
                  100.0 * r1, 100.0 * r5, 100.0 * r10, mean_rank);
  }
  return std::string(header) + "\n" + row + "\n";
}

MetricsReport evaluate(const DialogModel& model, const DialogCorpus& corpus,
                       const FeatureStore& features, const std::vector<DenseAnnotation>* dense,
                       const EvalOptions& opts) {
  NoGrad<float> guard;
  RunState rs; // evaluation mode: no dropout

  ModelConfig cfg = model.config();
  if (opts.include_caption.has_value()) cfg.include_caption = *opts.include_caption;

  std::optional<DenseIndex> dense_index;
  if (dense != nullptr) dense_index.emplace(*dense);

  std::vector<std::pair<int, int>> rounds;
  if (opts.subset != nullptr) {
    rounds = *opts.subset;
  } else {
    for (int d = 0; d < static_cast<int>(corpus.dialogs.size()); ++d)
      for (int r = 0; r < kRoundsPerDialog; ++r) rounds.emplace_back(d, r);
  }
  if (rounds.empty()) throw ValueError("evaluate: no rounds to evaluate");

  MetricsAccumulator acc;
  for (const auto& [d, r] : rounds) {
    RoundBatch batch = make_round_batch(corpus, d, r, model.vocab(), features, cfg,
                                        dense_index ? &*dense_index : nullptr);
    FTensor probs = model.forward(batch, rs);
    const std::vector<int> ranks = rank_candidates(probs.value());
    acc.add_gt(ranks[static_cast<size_t>(batch.gt_index)], static_cast<int>(ranks.size()));
    if (batch.relevance.has_value()) {
      acc.add_ndcg(ndcg(ranks, *batch.relevance));
    } else if (opts.impute_gt_relevance) {
      std::vector<float> one_hot(ranks.size(), 0.0f);
      one_hot[static_cast<size_t>(batch.gt_index)] = 1.0f;
      acc.add_ndcg(ndcg(ranks, one_hot));
    }
  }
  return acc.report();
}

} // namespace mcavd
