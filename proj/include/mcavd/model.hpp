// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcavd/attention.hpp"
#include "mcavd/data.hpp"
#include "mcavd/nn.hpp"

namespace mcavd {

/// The six dataflow wirings. 'I' consumes image features, 'H' dialog
/// history; see forward() for the exact composition per variant.
enum class VariantId {
  McaI,
  McaH,
  McaIHConcQ,
  McaIHGuidedQ,
  McaIVgh,
  McaIH,
};

VariantId parse_variant(const std::string& name);
const std::string& variant_name(VariantId id);
const std::vector<VariantId>& all_variants();
bool variant_uses_image(VariantId id);
bool variant_uses_history(VariantId id);

struct ModelConfig {
  VariantId variant = VariantId::McaIH;
  AttentionConfig attn; // attn.model_dim doubles as the fused dim d_z
  int embed_dim = 300;
  int feature_dim = 2048;
  int n_boxes = 36;
  int n_candidates = 100;
  int max_q_len = kMaxQuestionLen;
  int max_hist_len = kMaxHistoryLen;
  bool include_caption = true;

  void validate() const;
};

/// One dialog round prepared for the model: truncated token ids, the image
/// feature block, and the candidate list. `history` is nullopt when the
/// caller did not construct it (an error for history variants) and an empty
/// vector when the history is legitimately empty (round 1 without caption).
struct RoundBatch {
  std::vector<int> question;
  std::optional<std::vector<int>> history;
  FTensor image; // n_boxes x feature_dim, constant
  std::vector<std::vector<int>> candidates;
  int gt_index = -1;
  std::optional<std::vector<float>> relevance;
};

RoundBatch make_round_batch(const DialogCorpus& corpus, int dialog_idx, int round_idx,
                            const Vocabulary& vocab, const FeatureStore& features,
                            const ModelConfig& cfg, const DenseIndex* dense = nullptr);

/// Row i is the candidate encoder's final state for option i.
FTensor encode_candidates(const std::vector<std::vector<int>>& options,
                          const LstmEncoder<float>& encoder, const Embedding<float>& table);

/// Dot-product similarity between the fused vector (1 x d) and each
/// candidate encoding row: logits (1 x N).
FTensor score(const FTensor& z, const FTensor& candidates);

/// L = -(1/N) sum_n y_n log P_n with one-hot y. Probabilities below 1e-12
/// are clamped; `clamped` reports whether that fired.
FTensor loss_sparse(const FTensor& probs, int gt_index, bool* clamped = nullptr);
/// Same with y_n = relevance_n (raw weights, no renormalization).
FTensor loss_dense(const FTensor& probs, const std::vector<float>& relevance,
                   bool* clamped = nullptr);

class DialogModel {
public:
  DialogModel(ModelConfig cfg, Vocabulary vocab, SplitRng& init_rng);

  /// Candidate probability distribution, shape (N).
  FTensor forward(const RoundBatch& batch, const RunState& rs) const;

  ParamRegistry<float>& params() { return params_; }
  const ParamRegistry<float>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }

  /// Serialized config + vocabulary for checkpoints.
  std::string config_json() const;
  static DialogModel from_config_json(const std::string& json_text);

  /// Overwrites rows of the shared embedding from a word-vector text file.
  int load_word_vectors(const std::string& path);

  // components, public for tests and parameter surgery
  Embedding<float> embed;
  LstmEncoder<float> q_encoder;
  LstmEncoder<float> cand_encoder;
  std::optional<LstmEncoder<float>> hist_encoder;
  std::optional<Linear<float>> img_proj;
  std::optional<McaStack> stack_main;   // MCA-I / MCA-H / ConcQ / GuidedQ second stage
  std::optional<McaStack> stack_enrich; // GuidedQ first stage (history conditions question)
  std::optional<McaStack> stack_ground; // VGH image-grounding of history
  std::optional<McaStack> stack_img;    // VGH / MCA-I-H image stream
  std::optional<McaStack> stack_hist;   // VGH / MCA-I-H history stream
  std::optional<FusionHead> fuse_main;
  std::optional<FusionHead> fuse_img;
  std::optional<FusionHead> fuse_hist;
  std::optional<Linear<float>> combine; // 2*d_z -> d_z for two-component variants

private:
  void build(SplitRng& rng);
  void register_all();
  FTensor encode_question_stream(const std::vector<int>& ids, const RunState& rs) const;
  FTensor encode_history_stream(const std::vector<int>& ids, const RunState& rs) const;
  FTensor project_image(const FTensor& image) const;
  FTensor fused_representation(const RoundBatch& batch, const RunState& rs) const;

  ModelConfig cfg_;
  Vocabulary vocab_;
  ParamRegistry<float> params_;
};

} // namespace mcavd
