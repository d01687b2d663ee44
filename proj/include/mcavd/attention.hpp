// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "mcavd/nn.hpp"
#include "mcavd/ops.hpp"

namespace mcavd {

using FTensor = Tensor<float>;

struct AttentionConfig {
  int num_layers = 6;
  int num_heads = 8;
  int model_dim = 512;
  int ff_dim = 0; // 0 selects 4 * model_dim
  double dropout = 0.2;
  bool positional_encoding = false;

  int head_dim() const { return model_dim / num_heads; }
  int resolved_ff_dim() const { return ff_dim > 0 ? ff_dim : 4 * model_dim; }
  void validate() const;
};

/// Per-forward execution state: training enables dropout, which draws from
/// the run's dropout stream.
struct RunState {
  bool training = false;
  SplitRng* dropout_rng = nullptr;

  FTensor drop(const FTensor& x, double p) const {
    if (!training || p == 0.0) return x;
    return dropout(x, p, true, *dropout_rng);
  }
};

/// softmax(Q K^T / sqrt(d_K)) V with masked keys receiving -inf logits.
FTensor scaled_dot_attention(const FTensor& q, const FTensor& k, const FTensor& v,
                             const Mask& key_mask = {});

class MultiHeadAttention {
public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const AttentionConfig& cfg, SplitRng& rng);

  FTensor forward(const FTensor& x_q, const FTensor& x_kv, const Mask& key_mask,
                  const RunState& rs) const;
  void register_params(ParamRegistry<float>& reg, const std::string& prefix);

  Linear<float> q_proj, k_proj, v_proj, out_proj;
  int num_heads = 1;
};

class FeedForward {
public:
  FeedForward() = default;
  FeedForward(const AttentionConfig& cfg, SplitRng& rng);

  FTensor forward(const FTensor& x, const RunState& rs) const;
  void register_params(ParamRegistry<float>& reg, const std::string& prefix);

  Linear<float> fc1, fc2;
  double dropout_p = 0.0;
};

/// Self-attention unit: multi-head attention over one sequence plus a
/// feed-forward layer, each followed by residual add and layer norm.
class SaUnit {
public:
  SaUnit() = default;
  SaUnit(const AttentionConfig& cfg, SplitRng& rng);

  FTensor forward(const FTensor& x, const Mask& mask, const RunState& rs) const;
  void register_params(ParamRegistry<float>& reg, const std::string& prefix);

  MultiHeadAttention mha;
  FeedForward ff;
  LayerNormParams<float> ln_attn, ln_ff;
  double dropout_p = 0.0;
};

/// Guided-attention unit: queries come from x, keys/values from the other
/// modality y.
class GaUnit {
public:
  GaUnit() = default;
  GaUnit(const AttentionConfig& cfg, SplitRng& rng);

  FTensor forward(const FTensor& x, const FTensor& y, const Mask& y_mask,
                  const RunState& rs) const;
  void register_params(ParamRegistry<float>& reg, const std::string& prefix);

  MultiHeadAttention mha;
  FeedForward ff;
  LayerNormParams<float> ln_attn, ln_ff;
  double dropout_p = 0.0;
};

/// Encoder-decoder composition: the text stream passes L stacked SA units
/// producing X^L; the guided stream passes L (SA, then GA conditioned on
/// the final X^L) units producing Y^L.
class McaStack {
public:
  McaStack() = default;
  McaStack(const AttentionConfig& cfg, SplitRng& rng);

  std::pair<FTensor, FTensor> forward(const FTensor& text, const FTensor& other,
                                      const Mask& text_mask, const Mask& other_mask,
                                      const RunState& rs) const;
  void register_params(ParamRegistry<float>& reg, const std::string& prefix);

  std::vector<SaUnit> text_units;
  std::vector<SaUnit> guided_sa;
  std::vector<GaUnit> guided_ga;
};

/// Collapses a (m x d) sequence to one d-vector: per-row MLP scores
/// fc(d)-ReLU-Dropout-fc(1), masked softmax over rows, weighted sum.
class AttentionReducer {
public:
  AttentionReducer() = default;
  AttentionReducer(const AttentionConfig& cfg, SplitRng& rng);

  FTensor forward(const FTensor& x, const Mask& row_mask, const RunState& rs) const;
  void register_params(ParamRegistry<float>& reg, const std::string& prefix);

  Linear<float> fc1, fc2;
  double dropout_p = 0.0;
};

/// z = LayerNorm(W_x^T x~ + W_y^T y~) over the reduced stream vectors.
class FusionHead {
public:
  FusionHead() = default;
  FusionHead(const AttentionConfig& cfg, SplitRng& rng);

  FTensor fuse(const FTensor& x_red, const FTensor& y_red, const RunState& rs) const;
  /// Reduce both streams then fuse.
  FTensor forward(const FTensor& xl, const FTensor& yl, const Mask& x_mask, const Mask& y_mask,
                  const RunState& rs) const;
  void register_params(ParamRegistry<float>& reg, const std::string& prefix);

  AttentionReducer reduce_x, reduce_y;
  Linear<float> proj_x, proj_y; // model_dim -> d_z (= model_dim), bias-free
  LayerNormParams<float> ln;
};

/// Adds fixed sinusoidal position information to an embedded sequence.
FTensor add_positional_encoding(const FTensor& x);

} // namespace mcavd
