// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcavd/checkpoint.hpp"
#include "mcavd/metrics.hpp"
#include "mcavd/model.hpp"

namespace mcavd {

enum class Phase { Sparse, Dense };

const std::string& phase_name(Phase phase);

struct TrainConfig {
  double lr = 0.0;  // 0 selects the phase default: sparse 5e-4, dense 1e-4
  int epochs = 0;   // 0 selects the phase default: sparse 12, dense 15
  int batch_dialogs = 4;
  uint64_t seed = 1;
  std::vector<int> lr_milestones = {7, 10}; // sparse step decay epochs
  double lr_decay = 0.1;
  double plateau_factor = 0.2; // dense decay on tracked-NDCG plateau
  int plateau_patience = 2;
  int early_stop_patience = 5;
  double min_improve = 1e-4;
  double grad_clip = 5.0;
  double val_fraction = 0.1;
  std::string output_dir; // empty: keep everything in memory
  bool resume = false;    // continue from <output_dir>/ckpt_last.mcav if present

  double base_lr(Phase phase) const { return lr > 0.0 ? lr : (phase == Phase::Sparse ? 5e-4 : 1e-4); }
  int phase_epochs(Phase phase) const { return epochs > 0 ? epochs : (phase == Phase::Sparse ? 12 : 15); }
};

/// Sparse phase: step decay at the configured milestones. Dense phase: the
/// base rate shrunk by plateau_factor once per recorded plateau.
double lr_at(int epoch, Phase phase, const TrainConfig& cfg = {}, int plateau_reductions = 0);

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8); moment
/// buffers align with the registry by name.
class AdamState {
public:
  AdamState() = default;
  explicit AdamState(const ParamRegistry<float>& params);

  void step(ParamRegistry<float>& params, double lr);
  uint64_t step_count() const { return step_; }

  OptimizerBlocks to_blocks(const ParamRegistry<float>& params) const;
  static AdamState from_blocks(const ParamRegistry<float>& params, const OptimizerBlocks& blocks);

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

private:
  uint64_t step_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

/// Scales every gradient so the global L2 norm is at most max_norm;
/// returns the pre-clip norm.
double clip_global_norm(ParamRegistry<float>& params, double max_norm);

struct EpochRecord {
  int epoch = 0;
  Phase phase = Phase::Sparse;
  double loss = 0.0;
  double val_ndcg = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  double best_val_ndcg = 0.0;
  int best_epoch = -1;
  std::vector<EpochRecord> records;
};

/// Ground-truth cross-entropy over every round of the training split; the
/// model ends holding the best checkpoint by validation NDCG (rounds
/// without dense annotations contribute one-hot ground-truth relevance to
/// the tracked value).
TrainResult train_sparse(DialogModel& model, const DialogCorpus& corpus,
                         const FeatureStore& features, const TrainConfig& cfg,
                         const std::vector<DenseAnnotation>* dense = nullptr);

/// Relevance-weighted cross entropy over annotated rounds only, with the
/// plateau learning-rate rule; keeps the best-NDCG checkpoint.
TrainResult finetune_dense(DialogModel& model, const std::vector<DenseAnnotation>& dense,
                           const DialogCorpus& corpus, const FeatureStore& features,
                           const TrainConfig& cfg);

/// Seed-stable validation membership (independent of the run seed so the
/// split never changes across resumes or reruns).
bool is_validation_dialog(int64_t image_id, double val_fraction);

} // namespace mcavd
