// SPDX-License-Identifier: Apache-2.0

#include "mcavd/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcavd {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::TensorNode<T>>;

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<EMat<T>>;
template <typename T>
using CMapM = Eigen::Map<const EMat<T>>;

template <typename T>
std::vector<T>& grad_buf(const NodePtr<T>& n) {
  if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), T(0));
  return n->grad;
}

template <typename T>
bool want_grad(std::initializer_list<const Tensor<T>*> ins) {
  if (!Tape<T>::active().recording()) return false;
  for (const Tensor<T>* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

template <typename T>
void require_2d(const Tensor<T>& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " expects a 2-D tensor, got " + shape_str(t.shape()));
}

} // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<T> out(static_cast<size_t>(m) * n);
  MapM<T>(out.data(), m, n).noalias() =
      CMapM<T>(a.value().data(), m, k) * CMapM<T>(b.value().data(), k, n);
  bool rec = want_grad<T>({&a, &b});
  Tensor<T> y = Tensor<T>::op_result({m, n}, std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [a, b, y, m, k, n]() {
      CMapM<T> gy(y.node()->grad.data(), m, n);
      if (a.requires_grad()) {
        MapM<T>(grad_buf(a.node_ptr()).data(), m, k).noalias() +=
            gy * CMapM<T>(b.value().data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        MapM<T>(grad_buf(b.node_ptr()).data(), k, n).noalias() +=
            CMapM<T>(a.value().data(), m, k).transpose() * gy;
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (k != b.dim(1))
    throw ShapeError("matmul_nt shape mismatch: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  std::vector<T> out(static_cast<size_t>(m) * n);
  MapM<T>(out.data(), m, n).noalias() =
      CMapM<T>(a.value().data(), m, k) * CMapM<T>(b.value().data(), n, k).transpose();
  bool rec = want_grad<T>({&a, &b});
  Tensor<T> y = Tensor<T>::op_result({m, n}, std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [a, b, y, m, k, n]() {
      CMapM<T> gy(y.node()->grad.data(), m, n);
      if (a.requires_grad()) {
        MapM<T>(grad_buf(a.node_ptr()).data(), m, k).noalias() +=
            gy * CMapM<T>(b.value().data(), n, k);
      }
      if (b.requires_grad()) {
        MapM<T>(grad_buf(b.node_ptr()).data(), n, k).noalias() +=
            gy.transpose() * CMapM<T>(a.value().data(), m, k);
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require_2d(x, "transpose");
  const int m = x.dim(0), n = x.dim(1);
  std::vector<T> out(static_cast<size_t>(m) * n);
  MapM<T>(out.data(), n, m) = CMapM<T>(x.value().data(), m, n).transpose();
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result({n, m}, std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, m, n]() {
      MapM<T>(grad_buf(x.node_ptr()).data(), m, n).noalias() +=
          CMapM<T>(y.node()->grad.data(), n, m).transpose();
    });
  }
  return y;
}

namespace {

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> binary_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* name, FwdFn fwd,
                            BwdFn bwd) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(name) + " shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.value()[i], b.value()[i]);
  bool rec = want_grad<T>({&a, &b});
  Tensor<T> y = Tensor<T>::op_result(a.shape(), std::move(out), rec);
  if (rec) Tape<T>::active().record(y, [a, b, y, bwd]() { bwd(a, b, y); });
  return y;
}

} // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_same_shape<T>(
      a, b, "add", [](T u, T v) { return u + v; },
      [](const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& y) {
        const auto& gy = y.node()->grad;
        if (a.requires_grad()) {
          auto& ga = grad_buf(a.node_ptr());
          for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (b.requires_grad()) {
          auto& gb = grad_buf(b.node_ptr());
          for (size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
        }
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_same_shape<T>(
      a, b, "sub", [](T u, T v) { return u - v; },
      [](const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& y) {
        const auto& gy = y.node()->grad;
        if (a.requires_grad()) {
          auto& ga = grad_buf(a.node_ptr());
          for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (b.requires_grad()) {
          auto& gb = grad_buf(b.node_ptr());
          for (size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_same_shape<T>(
      a, b, "mul", [](T u, T v) { return u * v; },
      [](const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& y) {
        const auto& gy = y.node()->grad;
        if (a.requires_grad()) {
          auto& ga = grad_buf(a.node_ptr());
          for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * b.value()[i];
        }
        if (b.requires_grad()) {
          auto& gb = grad_buf(b.node_ptr());
          for (size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * a.value()[i];
        }
      });
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row) {
  require_2d(x, "add_row");
  const int m = x.dim(0), n = x.dim(1);
  if (row.numel() != n)
    throw ShapeError("add_row: row " + shape_str(row.shape()) + " does not match columns of " +
                     shape_str(x.shape()));
  std::vector<T> out(x.value().size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(i) * n + j] = x.value()[static_cast<size_t>(i) * n + j] + row.value()[static_cast<size_t>(j)];
  bool rec = want_grad<T>({&x, &row});
  Tensor<T> y = Tensor<T>::op_result(x.shape(), std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, row, y, m, n]() {
      const auto& gy = y.node()->grad;
      if (x.requires_grad()) {
        auto& gx = grad_buf(x.node_ptr());
        for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
      }
      if (row.requires_grad()) {
        auto& gr = grad_buf(row.node_ptr());
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) gr[static_cast<size_t>(j)] += gy[static_cast<size_t>(i) * n + j];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  std::vector<T> out(x.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = c * x.value()[i];
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result(x.shape(), std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, c]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      for (size_t i = 0; i < gy.size(); ++i) gx[i] += c * gy[i];
    });
  }
  return y;
}

namespace {

template <typename T, typename FwdFn, typename DerivFromOutFn>
Tensor<T> unary_from_output(const Tensor<T>& x, FwdFn fwd, DerivFromOutFn dydx) {
  std::vector<T> out(x.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.value()[i]);
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result(x.shape(), std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, dydx]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      const auto& yv = y.value();
      const auto& xv = x.value();
      for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * dydx(xv[i], yv[i]);
    });
  }
  return y;
}

} // namespace

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_from_output<T>(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T xi, T) { return xi > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_from_output<T>(
      x,
      [](T v) {
        // split to avoid overflow of exp for large |v|
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T, T yi) { return yi * (T(1) - yi); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary_from_output<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T yi) { return T(1) - yi * yi; });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int r = x.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r)
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(x.shape()));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
  const int64_t len = x.dim(axis);

  std::vector<T> out(x.value().size());
  const auto& xv = x.value();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (int64_t j = 0; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
      if (!(mx > -std::numeric_limits<T>::infinity()))
        throw ValueError("softmax over a slice with no finite entries");
      T denom = T(0);
      for (int64_t j = 0; j < len; ++j) {
        T e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        denom += e;
      }
      for (int64_t j = 0; j < len; ++j) out[base + j * inner] /= denom;
    }
  }
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result(x.shape(), std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, outer, inner, len]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      const auto& yv = y.value();
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * len * inner + in;
          T dot = T(0);
          for (int64_t j = 0; j < len; ++j) dot += yv[base + j * inner] * gy[base + j * inner];
          for (int64_t j = 0; j < len; ++j)
            gx[base + j * inner] += yv[base + j * inner] * (gy[base + j * inner] - dot);
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (x.rank() < 1) throw ShapeError("layer_norm expects rank >= 1");
  const int64_t width = x.dim(x.rank() - 1);
  if (gamma.numel() != width || beta.numel() != width)
    throw ShapeError("layer_norm: gamma/beta size must match last extent " + std::to_string(width));
  const int64_t rows = x.numel() / width;

  std::vector<T> out(x.value().size());
  std::vector<T> xhat(x.value().size());
  std::vector<T> inv_std(static_cast<size_t>(rows));
  const auto& xv = x.value();
  for (int64_t row = 0; row < rows; ++row) {
    const int64_t base = row * width;
    T mean = T(0);
    for (int64_t j = 0; j < width; ++j) mean += xv[base + j];
    mean /= static_cast<T>(width);
    T var = T(0);
    for (int64_t j = 0; j < width; ++j) {
      T d = xv[base + j] - mean;
      var += d * d;
    }
    var /= static_cast<T>(width);
    T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(row)] = is;
    for (int64_t j = 0; j < width; ++j) {
      T xh = (xv[base + j] - mean) * is;
      xhat[base + j] = xh;
      out[base + j] = gamma.value()[static_cast<size_t>(j)] * xh + beta.value()[static_cast<size_t>(j)];
    }
  }
  bool rec = want_grad<T>({&x, &gamma, &beta});
  Tensor<T> y = Tensor<T>::op_result(x.shape(), std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(
        y, [x, gamma, beta, y, rows, width, xhat = std::move(xhat), inv_std = std::move(inv_std)]() {
          const auto& gy = y.node()->grad;
          if (gamma.requires_grad()) {
            auto& gg = grad_buf(gamma.node_ptr());
            for (int64_t row = 0; row < rows; ++row)
              for (int64_t j = 0; j < width; ++j)
                gg[static_cast<size_t>(j)] += gy[row * width + j] * xhat[row * width + j];
          }
          if (beta.requires_grad()) {
            auto& gb = grad_buf(beta.node_ptr());
            for (int64_t row = 0; row < rows; ++row)
              for (int64_t j = 0; j < width; ++j) gb[static_cast<size_t>(j)] += gy[row * width + j];
          }
          if (x.requires_grad()) {
            auto& gx = grad_buf(x.node_ptr());
            std::vector<T> a(static_cast<size_t>(width));
            for (int64_t row = 0; row < rows; ++row) {
              const int64_t base = row * width;
              T mean_a = T(0), mean_ax = T(0);
              for (int64_t j = 0; j < width; ++j) {
                a[static_cast<size_t>(j)] = gy[base + j] * gamma.value()[static_cast<size_t>(j)];
                mean_a += a[static_cast<size_t>(j)];
                mean_ax += a[static_cast<size_t>(j)] * xhat[base + j];
              }
              mean_a /= static_cast<T>(width);
              mean_ax /= static_cast<T>(width);
              const T is = inv_std[static_cast<size_t>(row)];
              for (int64_t j = 0; j < width; ++j)
                gx[base + j] += is * (a[static_cast<size_t>(j)] - mean_a - xhat[base + j] * mean_ax);
            }
          }
        });
  }
  return y;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, SplitRng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ValueError("dropout probability must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.value().size());
  std::vector<T> out(x.value().size());
  for (size_t i = 0; i < out.size(); ++i) {
    const bool keep = rng.uniform() >= p;
    mask[i] = keep ? keep_scale : T(0);
    out[i] = x.value()[i] * mask[i];
  }
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result(x.shape(), std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, mask = std::move(mask)]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.value()) total += v;
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result({1}, {total}, rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y]() {
      auto& gx = grad_buf(x.node_ptr());
      const T g = y.node()->grad[0];
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

template <typename T>
Tensor<T> log_clamped(const Tensor<T>& x, T floor) {
  if (!(floor > T(0))) throw ValueError("log_clamped floor must be positive");
  std::vector<T> out(x.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(x.value()[i], floor));
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result(x.shape(), std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, floor]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      for (size_t i = 0; i < gy.size(); ++i)
        if (x.value()[i] > floor) gx[i] += gy[i] / x.value()[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result(std::move(shape), x.value(), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of zero tensors");
  const int n = parts[0].dim(1);
  int m = 0;
  bool rec = false;
  for (const auto& p : parts) {
    require_2d(p, "concat_rows");
    if (p.dim(1) != n)
      throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()));
    m += p.dim(0);
    rec = rec || (Tape<T>::active().recording() && p.requires_grad());
  }
  std::vector<T> out;
  out.reserve(static_cast<size_t>(m) * n);
  for (const auto& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
  Tensor<T> y = Tensor<T>::op_result({m, n}, std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [parts, y, n]() {
      const auto& gy = y.node()->grad;
      size_t offset = 0;
      for (const auto& p : parts) {
        const size_t count = p.value().size();
        if (p.requires_grad()) {
          auto& gp = grad_buf(p.node_ptr());
          for (size_t i = 0; i < count; ++i) gp[i] += gy[offset + i];
        }
        offset += count;
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of zero tensors");
  const int m = parts[0].dim(0);
  int n = 0;
  bool rec = false;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.dim(0) != m) throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape()));
    n += p.dim(1);
    rec = rec || (Tape<T>::active().recording() && p.requires_grad());
  }
  std::vector<T> out(static_cast<size_t>(m) * n);
  int col = 0;
  for (const auto& p : parts) {
    const int pn = p.dim(1);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < pn; ++j)
        out[static_cast<size_t>(i) * n + col + j] = p.value()[static_cast<size_t>(i) * pn + j];
    col += pn;
  }
  Tensor<T> y = Tensor<T>::op_result({m, n}, std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [parts, y, m, n]() {
      const auto& gy = y.node()->grad;
      int col = 0;
      for (const auto& p : parts) {
        const int pn = p.dim(1);
        if (p.requires_grad()) {
          auto& gp = grad_buf(p.node_ptr());
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < pn; ++j)
              gp[static_cast<size_t>(i) * pn + j] += gy[static_cast<size_t>(i) * n + col + j];
        }
        col += pn;
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, int start, int count) {
  require_2d(x, "slice_rows");
  const int m = x.dim(0), n = x.dim(1);
  if (start < 0 || count <= 0 || start + count > m)
    throw ShapeError("slice_rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_str(x.shape()));
  std::vector<T> out(x.value().begin() + static_cast<size_t>(start) * n,
                     x.value().begin() + static_cast<size_t>(start + count) * n);
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result({count, n}, std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, start, n]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      const size_t base = static_cast<size_t>(start) * n;
      for (size_t i = 0; i < gy.size(); ++i) gx[base + i] += gy[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int start, int count) {
  require_2d(x, "slice_cols");
  const int m = x.dim(0), n = x.dim(1);
  if (start < 0 || count <= 0 || start + count > n)
    throw ShapeError("slice_cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_str(x.shape()));
  std::vector<T> out(static_cast<size_t>(m) * count);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < count; ++j)
      out[static_cast<size_t>(i) * count + j] = x.value()[static_cast<size_t>(i) * n + start + j];
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result({m, count}, std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, start, m, n]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      const int count = y.dim(1);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < count; ++j)
          gx[static_cast<size_t>(i) * n + start + j] += gy[static_cast<size_t>(i) * count + j];
    });
  }
  return y;
}

template <typename T>
Tensor<T> mask_cols(const Tensor<T>& x, const Mask& keep) {
  if (keep.empty()) return x;
  require_2d(x, "mask_cols");
  const int m = x.dim(0), n = x.dim(1);
  if (static_cast<int>(keep.size()) != n)
    throw ShapeError("mask_cols: mask length " + std::to_string(keep.size()) +
                     " does not match columns of " + shape_str(x.shape()));
  const T neg_inf = -std::numeric_limits<T>::infinity();
  std::vector<T> out(x.value().size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(i) * n + j] = keep[static_cast<size_t>(j)]
                                                ? x.value()[static_cast<size_t>(i) * n + j]
                                                : neg_inf;
  bool rec = want_grad<T>({&x});
  Tensor<T> y = Tensor<T>::op_result(x.shape(), std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [x, y, keep, m, n]() {
      auto& gx = grad_buf(x.node_ptr());
      const auto& gy = y.node()->grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          if (keep[static_cast<size_t>(j)])
            gx[static_cast<size_t>(i) * n + j] += gy[static_cast<size_t>(i) * n + j];
    });
  }
  return y;
}

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, const std::vector<int>& ids, int pad_id) {
  require_2d(table, "embedding_lookup");
  if (ids.empty()) throw ShapeError("embedding_lookup of an empty id sequence");
  const int vocab = table.dim(0), dim = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= vocab)
      throw ValueError("token id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(vocab) + ")");
  const int len = static_cast<int>(ids.size());
  std::vector<T> out(static_cast<size_t>(len) * dim);
  for (int i = 0; i < len; ++i)
    std::copy_n(table.value().begin() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * dim, dim,
                out.begin() + static_cast<size_t>(i) * dim);
  bool rec = want_grad<T>({&table});
  Tensor<T> y = Tensor<T>::op_result({len, dim}, std::move(out), rec);
  if (rec) {
    Tape<T>::active().record(y, [table, y, ids, pad_id, dim, len]() {
      auto& gt = grad_buf(table.node_ptr());
      const auto& gy = y.node()->grad;
      for (int i = 0; i < len; ++i) {
        const int id = ids[static_cast<size_t>(i)];
        if (id == pad_id) continue;
        for (int j = 0; j < dim; ++j)
          gt[static_cast<size_t>(id) * dim + j] += gy[static_cast<size_t>(i) * dim + j];
      }
    });
  }
  return y;
}

#define MCAVD_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> transpose(const Tensor<T>&);                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> tanh(const Tensor<T>&);                                                      \
  template Tensor<T> softmax(const Tensor<T>&, int);                                              \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);         \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, SplitRng&);                          \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> log_clamped(const Tensor<T>&, T);                                            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                                  \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                  \
  template Tensor<T> slice_rows(const Tensor<T>&, int, int);                                      \
  template Tensor<T> slice_cols(const Tensor<T>&, int, int);                                      \
  template Tensor<T> mask_cols(const Tensor<T>&, const Mask&);                                    \
  template Tensor<T> embedding_lookup(const Tensor<T>&, const std::vector<int>&, int);

MCAVD_INSTANTIATE_OPS(float)
MCAVD_INSTANTIATE_OPS(double)

#undef MCAVD_INSTANTIATE_OPS

} // namespace mcavd
