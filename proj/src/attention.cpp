// SPDX-License-Identifier: Apache-2.0

#include "mcavd/attention.hpp"

#include <cmath>

namespace mcavd {

void AttentionConfig::validate() const {
  if (num_layers < 1) throw ValueError("num_layers must be >= 1");
  if (num_heads < 1) throw ValueError("num_heads must be >= 1");
  if (model_dim < 1 || model_dim % num_heads != 0)
    throw ValueError("model_dim " + std::to_string(model_dim) + " must be divisible by num_heads " +
                     std::to_string(num_heads));
  if (dropout < 0.0 || dropout >= 1.0) throw ValueError("dropout must be in [0, 1)");
}

namespace {

void check_key_mask(const Mask& mask, int n_keys, const char* what) {
  if (mask.empty()) return;
  if (static_cast<int>(mask.size()) != n_keys)
    throw ShapeError(std::string(what) + ": mask length " + std::to_string(mask.size()) +
                     " != number of keys " + std::to_string(n_keys));
  for (uint8_t keep : mask)
    if (keep) return;
  throw ValueError(std::string(what) + ": every key is masked");
}

} // namespace

FTensor scaled_dot_attention(const FTensor& q, const FTensor& k, const FTensor& v,
                             const Mask& key_mask) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw ShapeError("attention operands must be 2-D");
  if (q.dim(1) != k.dim(1))
    throw ShapeError("attention: query dim " + shape_str(q.shape()) + " vs key dim " +
                     shape_str(k.shape()));
  if (k.dim(0) != v.dim(0))
    throw ShapeError("attention: key rows " + shape_str(k.shape()) + " vs value rows " +
                     shape_str(v.shape()));
  check_key_mask(key_mask, k.dim(0), "scaled_dot_attention");

  const float inv_sqrt_dk = 1.0f / std::sqrt(static_cast<float>(q.dim(1)));
  FTensor logits = scale(matmul_nt(q, k), inv_sqrt_dk);
  FTensor weights = softmax(mask_cols(logits, key_mask), 1);
  return matmul(weights, v);
}

MultiHeadAttention::MultiHeadAttention(const AttentionConfig& cfg, SplitRng& rng)
    // the key projection carries no bias: softmax is invariant to the
    // per-query constant shift a key bias induces
    : q_proj(cfg.model_dim, cfg.model_dim, rng),
      k_proj(cfg.model_dim, cfg.model_dim, rng, /*with_bias=*/false),
      v_proj(cfg.model_dim, cfg.model_dim, rng),
      out_proj(cfg.model_dim, cfg.model_dim, rng),
      num_heads(cfg.num_heads) {}

FTensor MultiHeadAttention::forward(const FTensor& x_q, const FTensor& x_kv, const Mask& key_mask,
                                    const RunState&) const {
  const int d = q_proj.in_dim();
  if (x_q.rank() != 2 || x_q.dim(1) != d || x_kv.rank() != 2 || x_kv.dim(1) != d)
    throw ShapeError("multi_head_attention: inputs must have model dim " + std::to_string(d) +
                     ", got " + shape_str(x_q.shape()) + " and " + shape_str(x_kv.shape()));
  FTensor q = q_proj.forward(x_q);
  FTensor k = k_proj.forward(x_kv);
  FTensor v = v_proj.forward(x_kv);
  const int dk = d / num_heads;
  std::vector<FTensor> heads;
  heads.reserve(static_cast<size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    heads.push_back(scaled_dot_attention(slice_cols(q, h * dk, dk), slice_cols(k, h * dk, dk),
                                         slice_cols(v, h * dk, dk), key_mask));
  }
  return out_proj.forward(num_heads == 1 ? heads[0] : concat_cols(heads));
}

void MultiHeadAttention::register_params(ParamRegistry<float>& reg, const std::string& prefix) {
  q_proj.register_params(reg, prefix + ".q");
  k_proj.register_params(reg, prefix + ".k");
  v_proj.register_params(reg, prefix + ".v");
  out_proj.register_params(reg, prefix + ".out");
}

FeedForward::FeedForward(const AttentionConfig& cfg, SplitRng& rng)
    : fc1(cfg.model_dim, cfg.resolved_ff_dim(), rng),
      fc2(cfg.resolved_ff_dim(), cfg.model_dim, rng),
      dropout_p(cfg.dropout) {}

FTensor FeedForward::forward(const FTensor& x, const RunState& rs) const {
  return fc2.forward(rs.drop(relu(fc1.forward(x)), dropout_p));
}

void FeedForward::register_params(ParamRegistry<float>& reg, const std::string& prefix) {
  fc1.register_params(reg, prefix + ".fc1");
  fc2.register_params(reg, prefix + ".fc2");
}

SaUnit::SaUnit(const AttentionConfig& cfg, SplitRng& rng)
    : mha(cfg, rng), ff(cfg, rng), ln_attn(cfg.model_dim), ln_ff(cfg.model_dim),
      dropout_p(cfg.dropout) {}

FTensor SaUnit::forward(const FTensor& x, const Mask& mask, const RunState& rs) const {
  FTensor attended = ln_attn.forward(add(x, rs.drop(mha.forward(x, x, mask, rs), dropout_p)));
  return ln_ff.forward(add(attended, rs.drop(ff.forward(attended, rs), dropout_p)));
}

void SaUnit::register_params(ParamRegistry<float>& reg, const std::string& prefix) {
  mha.register_params(reg, prefix + ".mha");
  ff.register_params(reg, prefix + ".ff");
  ln_attn.register_params(reg, prefix + ".ln_attn");
  ln_ff.register_params(reg, prefix + ".ln_ff");
}

GaUnit::GaUnit(const AttentionConfig& cfg, SplitRng& rng)
    : mha(cfg, rng), ff(cfg, rng), ln_attn(cfg.model_dim), ln_ff(cfg.model_dim),
      dropout_p(cfg.dropout) {}

FTensor GaUnit::forward(const FTensor& x, const FTensor& y, const Mask& y_mask,
                        const RunState& rs) const {
  FTensor attended = ln_attn.forward(add(x, rs.drop(mha.forward(x, y, y_mask, rs), dropout_p)));
  return ln_ff.forward(add(attended, rs.drop(ff.forward(attended, rs), dropout_p)));
}

void GaUnit::register_params(ParamRegistry<float>& reg, const std::string& prefix) {
  mha.register_params(reg, prefix + ".mha");
  ff.register_params(reg, prefix + ".ff");
  ln_attn.register_params(reg, prefix + ".ln_attn");
  ln_ff.register_params(reg, prefix + ".ln_ff");
}

McaStack::McaStack(const AttentionConfig& cfg, SplitRng& rng) {
  cfg.validate();
  text_units.reserve(static_cast<size_t>(cfg.num_layers));
  guided_sa.reserve(static_cast<size_t>(cfg.num_layers));
  guided_ga.reserve(static_cast<size_t>(cfg.num_layers));
  for (int l = 0; l < cfg.num_layers; ++l) {
    text_units.emplace_back(cfg, rng);
    guided_sa.emplace_back(cfg, rng);
    guided_ga.emplace_back(cfg, rng);
  }
}

std::pair<FTensor, FTensor> McaStack::forward(const FTensor& text, const FTensor& other,
                                              const Mask& text_mask, const Mask& other_mask,
                                              const RunState& rs) const {
  FTensor x = text;
  for (const auto& unit : text_units) x = unit.forward(x, text_mask, rs);
  FTensor y = other;
  for (size_t l = 0; l < guided_sa.size(); ++l) {
    y = guided_sa[l].forward(y, other_mask, rs);
    y = guided_ga[l].forward(y, x, text_mask, rs);
  }
  return {x, y};
}

void McaStack::register_params(ParamRegistry<float>& reg, const std::string& prefix) {
  for (size_t l = 0; l < text_units.size(); ++l) {
    const std::string layer = prefix + ".layer" + std::to_string(l);
    text_units[l].register_params(reg, layer + ".text_sa");
    guided_sa[l].register_params(reg, layer + ".guided_sa");
    guided_ga[l].register_params(reg, layer + ".guided_ga");
  }
}

AttentionReducer::AttentionReducer(const AttentionConfig& cfg, SplitRng& rng)
    // fc2 bias would shift every row score equally; softmax ignores that
    : fc1(cfg.model_dim, cfg.model_dim, rng),
      fc2(cfg.model_dim, 1, rng, /*with_bias=*/false),
      dropout_p(cfg.dropout) {}

FTensor AttentionReducer::forward(const FTensor& x, const Mask& row_mask,
                                  const RunState& rs) const {
  if (x.rank() != 2) throw ShapeError("attention_reduce expects (m x d), got " + shape_str(x.shape()));
  if (!row_mask.empty()) {
    if (static_cast<int>(row_mask.size()) != x.dim(0))
      throw ShapeError("attention_reduce: mask length " + std::to_string(row_mask.size()) +
                       " != rows " + std::to_string(x.dim(0)));
    bool any = false;
    for (uint8_t keep : row_mask) any = any || keep;
    if (!any) throw ValueError("attention_reduce: every row is masked");
  }
  FTensor scores = fc2.forward(rs.drop(relu(fc1.forward(x)), dropout_p));
  FTensor alpha = softmax(mask_cols(transpose(scores), row_mask), 1); // 1 x m
  return matmul(alpha, x);                                           // 1 x d
}

void AttentionReducer::register_params(ParamRegistry<float>& reg, const std::string& prefix) {
  fc1.register_params(reg, prefix + ".fc1");
  fc2.register_params(reg, prefix + ".fc2");
}

FusionHead::FusionHead(const AttentionConfig& cfg, SplitRng& rng)
    : reduce_x(cfg, rng), reduce_y(cfg, rng),
      proj_x(cfg.model_dim, cfg.model_dim, rng, /*with_bias=*/false),
      proj_y(cfg.model_dim, cfg.model_dim, rng, /*with_bias=*/false), ln(cfg.model_dim) {}

FTensor FusionHead::fuse(const FTensor& x_red, const FTensor& y_red, const RunState&) const {
  return ln.forward(add(proj_x.forward(x_red), proj_y.forward(y_red)));
}

FTensor FusionHead::forward(const FTensor& xl, const FTensor& yl, const Mask& x_mask,
                            const Mask& y_mask, const RunState& rs) const {
  return fuse(reduce_x.forward(xl, x_mask, rs), reduce_y.forward(yl, y_mask, rs), rs);
}

void FusionHead::register_params(ParamRegistry<float>& reg, const std::string& prefix) {
  reduce_x.register_params(reg, prefix + ".reduce_x");
  reduce_y.register_params(reg, prefix + ".reduce_y");
  proj_x.register_params(reg, prefix + ".proj_x");
  proj_y.register_params(reg, prefix + ".proj_y");
  ln.register_params(reg, prefix + ".ln");
}

FTensor add_positional_encoding(const FTensor& x) {
  if (x.rank() != 2) throw ShapeError("positional encoding expects (len x d)");
  const int len = x.dim(0), d = x.dim(1);
  std::vector<float> pe(static_cast<size_t>(len) * d);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d; ++i) {
      const double angle = pos / std::pow(10000.0, (2.0 * (i / 2)) / d);
      pe[static_cast<size_t>(pos) * d + i] =
          static_cast<float>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  }
  return add(x, FTensor::from({len, d}, std::move(pe)));
}

} // namespace mcavd
