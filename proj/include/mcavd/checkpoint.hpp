// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcavd/tensor.hpp"

namespace mcavd {

struct NamedBlock {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

/// Optimizer moments carried alongside a resumable checkpoint; blocks are
/// aligned with the parameter blocks by name.
struct OptimizerBlocks {
  uint64_t step = 0;
  std::vector<NamedBlock> first_moment;
  std::vector<NamedBlock> second_moment;
};

/// On-disk model snapshot: magic "MCAV", format version, variant tag,
/// config JSON, named parameter blocks, optional optimizer state and
/// training progress.
struct CheckpointFile {
  uint8_t variant_tag = 0;
  std::string config_json;
  std::vector<NamedBlock> params;
  std::optional<OptimizerBlocks> optimizer;
  uint32_t epoch = 0;
  double best_metric = 0.0;
};

void write_checkpoint(const CheckpointFile& ckpt, const std::string& path);
CheckpointFile read_checkpoint(const std::string& path);

class DialogModel;
class AdamState;

/// Snapshot the model (and optionally Adam state) into a checkpoint file.
void save_model_checkpoint(const DialogModel& model, const std::string& path,
                           const AdamState* optimizer = nullptr, uint32_t epoch = 0,
                           double best_metric = 0.0);

/// Rebuild a model from a checkpoint; fails if any parameter block is
/// missing or shaped differently than the reconstructed architecture.
DialogModel load_model_checkpoint(const std::string& path, CheckpointFile* raw = nullptr);

} // namespace mcavd
