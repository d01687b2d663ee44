// SPDX-License-Identifier: Apache-2.0

#include "mcavd/model.hpp"

#include <json.hpp>

#include <algorithm>

namespace mcavd {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::vector<std::pair<VariantId, std::string>> kVariantNames = {
    {VariantId::McaI, "mca-i"},
    {VariantId::McaH, "mca-h"},
    {VariantId::McaIHConcQ, "mca-i-hconcq"},
    {VariantId::McaIHGuidedQ, "mca-i-hguidedq"},
    {VariantId::McaIVgh, "mca-i-vgh"},
    {VariantId::McaIH, "mca-i-h"},
};

std::vector<int> truncated(std::vector<int> ids, int max_len) {
  if (static_cast<int>(ids.size()) > max_len) ids.resize(static_cast<size_t>(max_len));
  return ids;
}

} // namespace

VariantId parse_variant(const std::string& name) {
  std::string lowered = name;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& [id, n] : kVariantNames)
    if (n == lowered) return id;
  throw ValueError("unknown variant: " + name);
}

const std::string& variant_name(VariantId id) {
  for (const auto& [vid, n] : kVariantNames)
    if (vid == id) return n;
  throw ValueError("unknown variant id");
}

const std::vector<VariantId>& all_variants() {
  static const std::vector<VariantId> ids = [] {
    std::vector<VariantId> v;
    for (const auto& [id, n] : kVariantNames) v.push_back(id);
    return v;
  }();
  return ids;
}

bool variant_uses_image(VariantId id) { return id != VariantId::McaH; }

bool variant_uses_history(VariantId id) { return id != VariantId::McaI; }

void ModelConfig::validate() const {
  attn.validate();
  if (embed_dim < 1) throw ValueError("embed_dim must be >= 1");
  if (feature_dim < 1 || n_boxes < 1) throw ValueError("image feature geometry invalid");
  if (n_candidates < 1) throw ValueError("n_candidates must be >= 1");
  if (max_q_len < 1 || max_hist_len < 1) throw ValueError("truncation limits must be >= 1");
}

RoundBatch make_round_batch(const DialogCorpus& corpus, int dialog_idx, int round_idx,
                            const Vocabulary& vocab, const FeatureStore& features,
                            const ModelConfig& cfg, const DenseIndex* dense) {
  if (dialog_idx < 0 || dialog_idx >= static_cast<int>(corpus.dialogs.size()))
    throw ValueError("dialog index " + std::to_string(dialog_idx) + " out of range");
  const Dialog& dialog = corpus.dialogs[static_cast<size_t>(dialog_idx)];
  if (round_idx < 0 || round_idx >= static_cast<int>(dialog.rounds.size()))
    throw ValueError("round index " + std::to_string(round_idx) + " out of range");
  const DialogRound& round = dialog.rounds[static_cast<size_t>(round_idx)];

  RoundBatch batch;
  batch.question = truncated(
      vocab.encode(tokenize(corpus.questions[static_cast<size_t>(round.question)])), cfg.max_q_len);
  if (variant_uses_history(cfg.variant))
    batch.history = vocab.encode(
        build_history(corpus, dialog, round_idx + 1, cfg.include_caption, cfg.max_hist_len));
  if (variant_uses_image(cfg.variant)) {
    if (features.n_boxes() != cfg.n_boxes || features.dim() != cfg.feature_dim)
      throw ShapeError("feature store geometry (" + std::to_string(features.n_boxes()) + ", " +
                       std::to_string(features.dim()) + ") does not match model config (" +
                       std::to_string(cfg.n_boxes) + ", " + std::to_string(cfg.feature_dim) + ")");
    batch.image =
        FTensor::from({cfg.n_boxes, cfg.feature_dim}, features.features(dialog.image_id));
  }
  batch.candidates.reserve(round.answer_options.size());
  for (int opt : round.answer_options)
    batch.candidates.push_back(truncated(
        vocab.encode(tokenize(corpus.answers[static_cast<size_t>(opt)])), cfg.max_q_len));
  batch.gt_index = round.gt_index;
  if (dense != nullptr) {
    if (const DenseAnnotation* ann = dense->find(dialog.image_id, round_idx + 1)) {
      if (ann->relevance.size() != round.answer_options.size())
        throw SchemaError("dense annotation for image " + std::to_string(dialog.image_id) +
                          " round " + std::to_string(round_idx + 1) + " has " +
                          std::to_string(ann->relevance.size()) + " values, expected " +
                          std::to_string(round.answer_options.size()));
      batch.relevance = ann->relevance;
    }
  }
  return batch;
}

FTensor encode_candidates(const std::vector<std::vector<int>>& options,
                          const LstmEncoder<float>& encoder, const Embedding<float>& table) {
  if (options.empty()) throw ValueError("encode_candidates: empty option list");
  std::vector<FTensor> rows;
  rows.reserve(options.size());
  const std::vector<int> unk{Vocabulary::kUnkId};
  for (const auto& ids : options) {
    const auto& tokens = ids.empty() ? unk : ids;
    rows.push_back(reshape(encoder.encode(table.forward(tokens)), {1, encoder.hidden_dim()}));
  }
  return rows.size() == 1 ? rows[0] : concat_rows(rows);
}

FTensor score(const FTensor& z, const FTensor& candidates) {
  FTensor zr = z.rank() == 1 ? reshape(z, {1, static_cast<int>(z.numel())}) : z;
  if (zr.rank() != 2 || zr.dim(0) != 1)
    throw ShapeError("score: fused vector must be (d) or (1 x d), got " + shape_str(z.shape()));
  if (candidates.rank() != 2 || candidates.dim(1) != zr.dim(1))
    throw ShapeError("score: candidate dim " + shape_str(candidates.shape()) +
                     " does not match fused dim " + shape_str(zr.shape()));
  return matmul_nt(zr, candidates); // 1 x N
}

namespace {

FTensor weighted_nll(const FTensor& probs, std::vector<float> weights, bool* clamped) {
  if (probs.numel() != static_cast<int64_t>(weights.size()))
    throw ShapeError("loss: weight length " + std::to_string(weights.size()) +
                     " does not match probabilities " + shape_str(probs.shape()));
  const float floor = 1e-12f;
  if (clamped != nullptr) {
    *clamped = false;
    for (size_t i = 0; i < weights.size(); ++i)
      if (weights[i] > 0.0f && probs.value()[i] < floor) *clamped = true;
  }
  const int n = static_cast<int>(weights.size());
  FTensor w = FTensor::from(probs.shape(), std::move(weights));
  FTensor weighted = mul(w, log_clamped(probs, floor));
  return scale(sum(weighted), -1.0f / static_cast<float>(n));
}

} // namespace

FTensor loss_sparse(const FTensor& probs, int gt_index, bool* clamped) {
  const int n = static_cast<int>(probs.numel());
  if (gt_index < 0 || gt_index >= n)
    throw ValueError("loss_sparse: gt_index " + std::to_string(gt_index) + " outside [0, " +
                     std::to_string(n) + ")");
  std::vector<float> weights(static_cast<size_t>(n), 0.0f);
  weights[static_cast<size_t>(gt_index)] = 1.0f;
  return weighted_nll(probs, std::move(weights), clamped);
}

FTensor loss_dense(const FTensor& probs, const std::vector<float>& relevance, bool* clamped) {
  for (float r : relevance)
    if (!(r >= 0.0f && r <= 1.0f))
      throw ValueError("loss_dense: relevance value " + std::to_string(r) + " outside [0, 1]");
  return weighted_nll(probs, relevance, clamped);
}

DialogModel::DialogModel(ModelConfig cfg, Vocabulary vocab, SplitRng& init_rng)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  cfg_.validate();
  build(init_rng);
  register_all();
}

void DialogModel::build(SplitRng& rng) {
  const auto& attn = cfg_.attn;
  const int d = attn.model_dim;
  SplitRng r = rng.split("model_init");

  embed = Embedding<float>(vocab_.size(), cfg_.embed_dim, r);
  q_encoder = LstmEncoder<float>(cfg_.embed_dim, d, r);
  cand_encoder = LstmEncoder<float>(cfg_.embed_dim, d, r);

  const VariantId v = cfg_.variant;
  const bool history_stream = v == VariantId::McaH || v == VariantId::McaIHGuidedQ ||
                              v == VariantId::McaIVgh || v == VariantId::McaIH;
  if (history_stream) hist_encoder.emplace(cfg_.embed_dim, d, r);
  if (variant_uses_image(v)) img_proj.emplace(cfg_.feature_dim, d, r);

  switch (v) {
    case VariantId::McaI:
    case VariantId::McaH:
    case VariantId::McaIHConcQ:
      stack_main.emplace(attn, r);
      fuse_main.emplace(attn, r);
      break;
    case VariantId::McaIHGuidedQ:
      stack_enrich.emplace(attn, r);
      stack_main.emplace(attn, r);
      fuse_main.emplace(attn, r);
      break;
    case VariantId::McaIVgh:
      stack_ground.emplace(attn, r);
      stack_img.emplace(attn, r);
      stack_hist.emplace(attn, r);
      fuse_img.emplace(attn, r);
      fuse_hist.emplace(attn, r);
      combine.emplace(2 * d, d, r);
      break;
    case VariantId::McaIH:
      stack_img.emplace(attn, r);
      stack_hist.emplace(attn, r);
      fuse_img.emplace(attn, r);
      fuse_hist.emplace(attn, r);
      combine.emplace(2 * d, d, r);
      break;
  }
}

void DialogModel::register_all() {
  embed.register_params(params_, "embed");
  q_encoder.register_params(params_, "q_encoder");
  cand_encoder.register_params(params_, "cand_encoder");
  if (hist_encoder) hist_encoder->register_params(params_, "hist_encoder");
  if (img_proj) img_proj->register_params(params_, "img_proj");
  if (stack_main) stack_main->register_params(params_, "stack_main");
  if (stack_enrich) stack_enrich->register_params(params_, "stack_enrich");
  if (stack_ground) stack_ground->register_params(params_, "stack_ground");
  if (stack_img) stack_img->register_params(params_, "stack_img");
  if (stack_hist) stack_hist->register_params(params_, "stack_hist");
  if (fuse_main) fuse_main->register_params(params_, "fuse_main");
  if (fuse_img) fuse_img->register_params(params_, "fuse_img");
  if (fuse_hist) fuse_hist->register_params(params_, "fuse_hist");
  if (combine) combine->register_params(params_, "combine");
}

FTensor DialogModel::encode_question_stream(const std::vector<int>& ids,
                                            const RunState& rs) const {
  (void)rs;
  static const std::vector<int> unk{Vocabulary::kUnkId};
  FTensor embedded = embed.forward(ids.empty() ? unk : ids);
  if (cfg_.attn.positional_encoding) embedded = add_positional_encoding(embedded);
  return q_encoder.states(embedded);
}

FTensor DialogModel::encode_history_stream(const std::vector<int>& ids,
                                           const RunState& rs) const {
  (void)rs;
  static const std::vector<int> unk{Vocabulary::kUnkId};
  FTensor embedded = embed.forward(ids.empty() ? unk : ids);
  if (cfg_.attn.positional_encoding) embedded = add_positional_encoding(embedded);
  return hist_encoder->states(embedded);
}

FTensor DialogModel::project_image(const FTensor& image) const {
  if (!image.defined())
    throw ValueError("variant " + variant_name(cfg_.variant) + " requires image features");
  if (image.rank() != 2 || image.dim(1) != cfg_.feature_dim)
    throw ShapeError("image features " + shape_str(image.shape()) + " do not match feature_dim " +
                     std::to_string(cfg_.feature_dim));
  return img_proj->forward(image);
}

FTensor DialogModel::fused_representation(const RoundBatch& batch, const RunState& rs) const {
  const VariantId v = cfg_.variant;
  if (variant_uses_history(v) && !batch.history.has_value())
    throw ValueError("variant " + variant_name(v) + " requires dialog history");

  switch (v) {
    case VariantId::McaI: {
      FTensor xq = encode_question_stream(batch.question, rs);
      FTensor img = project_image(batch.image);
      auto [xl, yl] = stack_main->forward(xq, img, {}, {}, rs);
      return fuse_main->forward(xl, yl, {}, {}, rs);
    }
    case VariantId::McaH: {
      FTensor xq = encode_question_stream(batch.question, rs);
      FTensor hist = encode_history_stream(*batch.history, rs);
      auto [xl, yl] = stack_main->forward(xq, hist, {}, {}, rs);
      return fuse_main->forward(xl, yl, {}, {}, rs);
    }
    case VariantId::McaIHConcQ: {
      // history prepended to the question, truncated to the most recent
      // history tokens that fit the joint budget
      std::vector<int> merged;
      const auto& hist = *batch.history;
      const int budget = cfg_.max_hist_len + cfg_.max_q_len - static_cast<int>(batch.question.size());
      const int keep = std::min<int>(static_cast<int>(hist.size()), budget);
      merged.insert(merged.end(), hist.end() - keep, hist.end());
      merged.insert(merged.end(), batch.question.begin(), batch.question.end());
      FTensor xq = encode_question_stream(merged, rs);
      FTensor img = project_image(batch.image);
      auto [xl, yl] = stack_main->forward(xq, img, {}, {}, rs);
      return fuse_main->forward(xl, yl, {}, {}, rs);
    }
    case VariantId::McaIHGuidedQ: {
      FTensor hist = encode_history_stream(*batch.history, rs);
      FTensor xq = encode_question_stream(batch.question, rs);
      // first module: history is the conditioning stream, the question is
      // guided by it, producing the coreference-enriched question
      auto [hl, q_enriched] = stack_enrich->forward(hist, xq, {}, {}, rs);
      FTensor img = project_image(batch.image);
      auto [xl, yl] = stack_main->forward(q_enriched, img, {}, {}, rs);
      return fuse_main->forward(xl, yl, {}, {}, rs);
    }
    case VariantId::McaIVgh: {
      FTensor hist = encode_history_stream(*batch.history, rs);
      FTensor img = project_image(batch.image);
      // ground the history in the image first
      auto [il, grounded] = stack_ground->forward(img, hist, {}, {}, rs);
      FTensor xq = encode_question_stream(batch.question, rs);
      auto [xh, yh] = stack_hist->forward(xq, grounded, {}, {}, rs);
      auto [xi, yi] = stack_img->forward(xq, img, {}, {}, rs);
      FTensor z_hist = fuse_hist->forward(xh, yh, {}, {}, rs);
      FTensor z_img = fuse_img->forward(xi, yi, {}, {}, rs);
      return combine->forward(concat_cols(std::vector<FTensor>{z_img, z_hist}));
    }
    case VariantId::McaIH: {
      FTensor xq = encode_question_stream(batch.question, rs);
      FTensor img = project_image(batch.image);
      FTensor hist = encode_history_stream(*batch.history, rs);
      auto [xi, yi] = stack_img->forward(xq, img, {}, {}, rs);
      auto [xh, yh] = stack_hist->forward(xq, hist, {}, {}, rs);
      FTensor z_img = fuse_img->forward(xi, yi, {}, {}, rs);
      FTensor z_hist = fuse_hist->forward(xh, yh, {}, {}, rs);
      return combine->forward(concat_cols(std::vector<FTensor>{z_img, z_hist}));
    }
  }
  throw ValueError("unknown variant id");
}

FTensor DialogModel::forward(const RoundBatch& batch, const RunState& rs) const {
  if (batch.candidates.empty()) throw ValueError("forward: round has no candidates");
  FTensor z = fused_representation(batch, rs);
  FTensor cands = encode_candidates(batch.candidates, cand_encoder, embed);
  FTensor logits = score(z, cands);
  return reshape(softmax(logits, 1), {static_cast<int>(batch.candidates.size())});
}

std::string DialogModel::config_json() const {
  ordered_json j;
  j["variant"] = variant_name(cfg_.variant);
  j["num_layers"] = cfg_.attn.num_layers;
  j["num_heads"] = cfg_.attn.num_heads;
  j["model_dim"] = cfg_.attn.model_dim;
  j["ff_dim"] = cfg_.attn.ff_dim;
  j["dropout"] = cfg_.attn.dropout;
  j["positional_encoding"] = cfg_.attn.positional_encoding;
  j["embed_dim"] = cfg_.embed_dim;
  j["feature_dim"] = cfg_.feature_dim;
  j["n_boxes"] = cfg_.n_boxes;
  j["n_candidates"] = cfg_.n_candidates;
  j["max_q_len"] = cfg_.max_q_len;
  j["max_hist_len"] = cfg_.max_hist_len;
  j["include_caption"] = cfg_.include_caption;
  j["vocab"] = std::vector<std::string>(vocab_.tokens().begin() + 2, vocab_.tokens().end());
  return j.dump();
}

DialogModel DialogModel::from_config_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid checkpoint config JSON: ") + e.what());
  }
  ModelConfig cfg;
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  cfg.attn.num_layers = j.at("num_layers").get<int>();
  cfg.attn.num_heads = j.at("num_heads").get<int>();
  cfg.attn.model_dim = j.at("model_dim").get<int>();
  cfg.attn.ff_dim = j.at("ff_dim").get<int>();
  cfg.attn.dropout = j.at("dropout").get<double>();
  cfg.attn.positional_encoding = j.at("positional_encoding").get<bool>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.n_boxes = j.at("n_boxes").get<int>();
  cfg.n_candidates = j.at("n_candidates").get<int>();
  cfg.max_q_len = j.at("max_q_len").get<int>();
  cfg.max_hist_len = j.at("max_hist_len").get<int>();
  cfg.include_caption = j.at("include_caption").get<bool>();
  Vocabulary vocab;
  for (const auto& token : j.at("vocab").get<std::vector<std::string>>()) vocab.add(token);
  SplitRng rng(0); // parameters are overwritten from the checkpoint blocks
  return DialogModel(std::move(cfg), std::move(vocab), rng);
}

int DialogModel::load_word_vectors(const std::string& path) {
  return embed.load_pretrained(path, vocab_.token_ids());
}

} // namespace mcavd
