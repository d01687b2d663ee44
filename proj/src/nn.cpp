// SPDX-License-Identifier: Apache-2.0

#include "mcavd/nn.hpp"

#include <Eigen/Core>

#include <cmath>
#include <fstream>
#include <sstream>

namespace mcavd {

namespace {

template <typename T>
Tensor<T> glorot_uniform(int d_in, int d_out, SplitRng& rng) {
  const double bound = std::sqrt(6.0 / (d_in + d_out));
  std::vector<T> data(static_cast<size_t>(d_in) * d_out);
  for (auto& v : data) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>::from({d_in, d_out}, std::move(data), true);
}

} // namespace

template <typename T>
Linear<T>::Linear(int d_in, int d_out, SplitRng& rng, bool with_bias)
    : weight(glorot_uniform<T>(d_in, d_out, rng)) {
  if (with_bias) bias = Tensor<T>({d_out}, T(0), true);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y = matmul(x, weight);
  if (bias.defined()) y = add_row(y, bias);
  return y;
}

template <typename T>
void Linear<T>::register_params(ParamRegistry<T>& reg, const std::string& prefix) {
  reg.add(prefix + ".weight", weight);
  if (bias.defined()) reg.add(prefix + ".bias", bias);
}

template <typename T>
Embedding<T>::Embedding(int vocab_size, int dim, SplitRng& rng) {
  if (vocab_size < 2) throw ValueError("embedding table needs at least PAD and UNK rows");
  std::vector<T> data(static_cast<size_t>(vocab_size) * dim, T(0));
  for (int i = kUnkId; i < vocab_size; ++i)
    for (int j = 0; j < dim; ++j)
      data[static_cast<size_t>(i) * dim + j] = static_cast<T>(rng.uniform(-0.1, 0.1));
  rows = Tensor<T>::from({vocab_size, dim}, std::move(data), true);
}

template <typename T>
Tensor<T> Embedding<T>::forward(const std::vector<int>& ids) const {
  return embedding_lookup(rows, ids, kPadId);
}

template <typename T>
void Embedding<T>::register_params(ParamRegistry<T>& reg, const std::string& prefix) {
  reg.add(prefix + ".rows", rows);
}

template <typename T>
int Embedding<T>::load_pretrained(const std::string& path,
                                  const std::unordered_map<std::string, int>& token_ids) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open word-vector file: " + path);
  const int d = dim();
  int loaded = 0;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    auto it = token_ids.find(token);
    if (it == token_ids.end()) {
      continue; // token outside the vocabulary
    }
    const int id = it->second;
    if (id == kPadId) continue; // padding row stays zero
    for (int j = 0; j < d; ++j) {
      double v;
      if (!(ss >> v))
        throw FormatError("word-vector line " + std::to_string(line_no) + " has fewer than " +
                          std::to_string(d) + " values");
      rows.value()[static_cast<size_t>(id) * d + j] = static_cast<T>(v);
    }
    ++loaded;
  }
  return loaded;
}

template <typename T>
LstmEncoder<T>::LstmEncoder(int input_dim, int hidden_dim, SplitRng& rng)
    : w_ih(glorot_uniform<T>(input_dim, 4 * hidden_dim, rng)),
      w_hh(glorot_uniform<T>(hidden_dim, 4 * hidden_dim, rng)),
      bias(Tensor<T>({4 * hidden_dim}, T(0), true)) {
  // forget-gate bias starts at 1 so early training retains state
  for (int j = hidden_dim; j < 2 * hidden_dim; ++j) bias.value()[static_cast<size_t>(j)] = T(1);
}

// Fused sequence op: one tape entry per sequence instead of ~12 per step.
// Forward caches post-activation gates and cell states; backward runs
// standard truncation-free BPTT over the cache.
template <typename T>
Tensor<T> LstmEncoder<T>::run(const Tensor<T>& seq, bool keep_all) const {
  if (!seq.defined() || seq.rank() != 2 || seq.dim(0) < 1)
    throw ShapeError("lstm input must be a nonempty (len x input_dim) sequence, got " +
                     (seq.defined() ? shape_str(seq.shape()) : std::string("<undefined>")));
  if (seq.dim(1) != input_dim())
    throw ShapeError("lstm input dim " + std::to_string(seq.dim(1)) + " != expected " +
                     std::to_string(input_dim()));
  const int len = seq.dim(0);
  const int d_in = input_dim();
  const int h = hidden_dim();
  const int g4 = 4 * h;

  using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapM = Eigen::Map<EMat>;
  using CMapM = Eigen::Map<const EMat>;
  CMapM x(seq.value().data(), len, d_in);
  CMapM wi(w_ih.value().data(), d_in, g4);
  CMapM wh(w_hh.value().data(), h, g4);

  // input contributions for every step in one product
  EMat pre = x * wi;
  pre.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value().data(), g4);

  std::vector<T> gates(static_cast<size_t>(len) * g4); // post-activation i,f,g,o
  std::vector<T> cells(static_cast<size_t>(len) * h);  // c_t
  std::vector<T> states(static_cast<size_t>(len) * h); // h_t
  Eigen::Matrix<T, 1, Eigen::Dynamic> a(g4);
  for (int t = 0; t < len; ++t) {
    a = pre.row(t);
    if (t > 0)
      a.noalias() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
                         &states[static_cast<size_t>(t - 1) * h], h) *
                     wh;
    T* gate_row = &gates[static_cast<size_t>(t) * g4];
    T* cell_row = &cells[static_cast<size_t>(t) * h];
    T* state_row = &states[static_cast<size_t>(t) * h];
    const T* prev_cell = t > 0 ? &cells[static_cast<size_t>(t - 1) * h] : nullptr;
    for (int j = 0; j < h; ++j) {
      const T i_g = T(1) / (T(1) + std::exp(-a[j]));
      const T f_g = T(1) / (T(1) + std::exp(-a[h + j]));
      const T g_g = std::tanh(a[2 * h + j]);
      const T o_g = T(1) / (T(1) + std::exp(-a[3 * h + j]));
      gate_row[j] = i_g;
      gate_row[h + j] = f_g;
      gate_row[2 * h + j] = g_g;
      gate_row[3 * h + j] = o_g;
      const T c_t = f_g * (prev_cell ? prev_cell[j] : T(0)) + i_g * g_g;
      cell_row[j] = c_t;
      state_row[j] = o_g * std::tanh(c_t);
    }
  }

  std::vector<T> out_values =
      keep_all ? states
               : std::vector<T>(states.end() - h, states.end());
  const Shape out_shape = keep_all ? Shape{len, h} : Shape{1, h};
  const bool rec = Tape<T>::active().recording() &&
                   (seq.requires_grad() || w_ih.requires_grad() || w_hh.requires_grad() ||
                    bias.requires_grad());
  Tensor<T> out = Tensor<T>::op_result(out_shape, std::move(out_values), rec);
  if (!rec) return out;

  Tensor<T> seq_t = seq, wi_t = w_ih, wh_t = w_hh, bias_t = bias;
  Tape<T>::active().record(
      out, [seq_t, wi_t, wh_t, bias_t, out, gates = std::move(gates), cells = std::move(cells),
            states = std::move(states), len, d_in, h, g4, keep_all]() {
        const auto& gout = out.node()->grad;
        CMapM x(seq_t.value().data(), len, d_in);
        CMapM wi(wi_t.value().data(), d_in, g4);
        CMapM wh(wh_t.value().data(), h, g4);

        EMat d_pre(len, g4); // gradients at the pre-activation gate level
        Eigen::Matrix<T, 1, Eigen::Dynamic> dh(h), dc(h);
        dh.setZero();
        dc.setZero();
        for (int t = len - 1; t >= 0; --t) {
          if (keep_all)
            dh += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
                &gout[static_cast<size_t>(t) * h], h);
          else if (t == len - 1)
            dh += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(gout.data(), h);
          const T* gate_row = &gates[static_cast<size_t>(t) * g4];
          const T* cell_row = &cells[static_cast<size_t>(t) * h];
          const T* prev_cell = t > 0 ? &cells[static_cast<size_t>(t - 1) * h] : nullptr;
          T* d_row = d_pre.row(t).data();
          for (int j = 0; j < h; ++j) {
            const T i_g = gate_row[j], f_g = gate_row[h + j], g_g = gate_row[2 * h + j],
                    o_g = gate_row[3 * h + j];
            const T tanh_c = std::tanh(cell_row[j]);
            const T dcell = dc[j] + dh[j] * o_g * (T(1) - tanh_c * tanh_c);
            d_row[j] = dcell * g_g * i_g * (T(1) - i_g);
            d_row[h + j] = dcell * (prev_cell ? prev_cell[j] : T(0)) * f_g * (T(1) - f_g);
            d_row[2 * h + j] = dcell * i_g * (T(1) - g_g * g_g);
            d_row[3 * h + j] = dh[j] * tanh_c * o_g * (T(1) - o_g);
            dc[j] = dcell * f_g;
          }
          if (t > 0)
            dh.noalias() = d_pre.row(t) * wh.transpose();
          else
            dh.setZero();
        }

        if (wi_t.requires_grad())
          MapM(wi_t.grad().data(), d_in, g4).noalias() += x.transpose() * d_pre;
        if (wh_t.requires_grad() && len > 1) {
          CMapM h_prev(states.data(), len - 1, h);
          MapM(wh_t.grad().data(), h, g4).noalias() +=
              h_prev.transpose() * d_pre.bottomRows(len - 1);
        }
        if (bias_t.requires_grad()) {
          auto& gb = bias_t.grad();
          for (int t = 0; t < len; ++t)
            for (int j = 0; j < g4; ++j) gb[static_cast<size_t>(j)] += d_pre(t, j);
        }
        if (seq_t.requires_grad())
          MapM(seq_t.grad().data(), len, d_in).noalias() += d_pre * wi.transpose();
      });
  return out;
}

template <typename T>
Tensor<T> LstmEncoder<T>::encode(const Tensor<T>& seq) const {
  return reshape(run(seq, false), {hidden_dim()});
}

template <typename T>
Tensor<T> LstmEncoder<T>::states(const Tensor<T>& seq) const {
  return run(seq, true);
}

template <typename T>
void LstmEncoder<T>::register_params(ParamRegistry<T>& reg, const std::string& prefix) {
  reg.add(prefix + ".w_ih", w_ih);
  reg.add(prefix + ".w_hh", w_hh);
  reg.add(prefix + ".bias", bias);
}

template class ParamRegistry<float>;
template class Linear<float>;
template class Embedding<float>;
template class LstmEncoder<float>;
template class ParamRegistry<double>;
template class Linear<double>;
template class Embedding<double>;
template class LstmEncoder<double>;

} // namespace mcavd
