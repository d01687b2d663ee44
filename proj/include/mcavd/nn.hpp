// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mcavd/ops.hpp"
#include "mcavd/rng.hpp"
#include "mcavd/tensor.hpp"

namespace mcavd {

/// Named view over every trainable tensor of a model, in registration
/// order. The order is deterministic, so checkpoints and optimizer state
/// align by construction.
template <typename T>
class ParamRegistry {
public:
  void add(std::string name, Tensor<T> param) {
    if (index_.count(name)) throw ValueError("duplicate parameter name: " + name);
    index_[name] = params_.size();
    params_.emplace_back(std::move(name), std::move(param));
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return params_; }
  size_t size() const { return params_.size(); }

  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter: " + name);
    return params_[it->second].second;
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

private:
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  std::unordered_map<std::string, size_t> index_;
};

/// Affine projection x (m x d_in) -> x W + b (m x d_out).
template <typename T>
class Linear {
public:
  Linear() = default;
  Linear(int d_in, int d_out, SplitRng& rng, bool with_bias = true);

  Tensor<T> forward(const Tensor<T>& x) const;
  void register_params(ParamRegistry<T>& reg, const std::string& prefix);

  int in_dim() const { return weight.dim(0); }
  int out_dim() const { return weight.dim(1); }

  Tensor<T> weight; // d_in x d_out
  Tensor<T> bias;   // (d_out), undefined when bias-free
};

/// Token embedding table. Row 0 is the padding vector (all-zero, never
/// updated); row 1 is the unknown-token vector.
template <typename T>
class Embedding {
public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Embedding() = default;
  Embedding(int vocab_size, int dim, SplitRng& rng);

  Tensor<T> forward(const std::vector<int>& ids) const;
  void register_params(ParamRegistry<T>& reg, const std::string& prefix);

  /// Overwrites rows for tokens found in a word-vector text file
  /// (token followed by `dim` space-separated floats per line).
  /// Returns the number of rows initialized from the file.
  int load_pretrained(const std::string& path,
                      const std::unordered_map<std::string, int>& token_ids);

  int vocab_size() const { return rows.dim(0); }
  int dim() const { return rows.dim(1); }

  Tensor<T> rows; // vocab_size x dim
};

/// Single-layer LSTM sequence encoder (gate order: input, forget, cell,
/// output). encode() returns the final hidden state; states() returns the
/// full hidden-state sequence for attention stacks.
template <typename T>
class LstmEncoder {
public:
  LstmEncoder() = default;
  LstmEncoder(int input_dim, int hidden_dim, SplitRng& rng);

  /// Final hidden state, shape (hidden_dim).
  Tensor<T> encode(const Tensor<T>& seq) const;
  /// All hidden states, shape (len x hidden_dim).
  Tensor<T> states(const Tensor<T>& seq) const;

  void register_params(ParamRegistry<T>& reg, const std::string& prefix);

  int input_dim() const { return w_ih.dim(0); }
  int hidden_dim() const { return w_hh.dim(0); }

  Tensor<T> w_ih; // input_dim x 4*hidden
  Tensor<T> w_hh; // hidden x 4*hidden
  Tensor<T> bias; // (4*hidden)

private:
  Tensor<T> run(const Tensor<T>& seq, bool keep_all) const;
};

/// Learnable layer-norm affine pair.
template <typename T>
struct LayerNormParams {
  LayerNormParams() = default;
  explicit LayerNormParams(int width)
      : gamma(Tensor<T>({width}, T(1), true)), beta(Tensor<T>({width}, T(0), true)) {}

  Tensor<T> forward(const Tensor<T>& x, T eps = T(1e-5)) const {
    return layer_norm(x, gamma, beta, eps);
  }
  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add(prefix + ".gamma", gamma);
    reg.add(prefix + ".beta", beta);
  }

  Tensor<T> gamma;
  Tensor<T> beta;
};

extern template class ParamRegistry<float>;
extern template class Linear<float>;
extern template class Embedding<float>;
extern template class LstmEncoder<float>;
extern template class ParamRegistry<double>;
extern template class Linear<double>;
extern template class Embedding<double>;
extern template class LstmEncoder<double>;

} // namespace mcavd
