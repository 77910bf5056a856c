#include "entransformer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "entransformer/errors.hpp"

namespace entransformer {
namespace {

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// C[m x n] += A[m x k] . B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] . B[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[m x n] += A[k x m]^T . B[k x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), op, {x}, [deriv](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(px.data[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      auto& g = parent->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), "sub", {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_broadcast(const Tensor& x, const Tensor& y) {
  const Shape& xs = x.shape();
  const Shape& ys = y.shape();
  if (ys.size() > xs.size() || !std::equal(ys.rbegin(), ys.rend(), xs.rbegin())) {
    throw DimensionError("add_broadcast: " + shape_string(ys) + " is not a suffix of " + shape_string(xs));
  }
  const std::size_t inner = y.size();
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t base = 0; base < out.size(); base += inner) {
    for (std::size_t j = 0; j < inner; ++j) out[base + j] += y.data()[j];
  }
  return Tensor::make_result(xs, std::move(out), "add_broadcast", {x, y}, [inner](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t base = 0; base < self.grad.size(); base += inner) {
        for (std::size_t j = 0; j < inner; ++j) g[j] += self.grad[base + j];
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make_result({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) gemm_nt(self.grad.data(), pb.data.data(), pa.ensure_grad().data(), m, n, k);
    if (pb.requires_grad) gemm_tn(pa.data.data(), self.grad.data(), pb.ensure_grad().data(), k, m, n);
  });
}

Tensor matmul_last(const Tensor& x, const Tensor& w) {
  if (x.rank() < 1 || w.rank() != 2 || x.shape().back() != w.dim(0)) {
    throw DimensionError("matmul_last: incompatible shapes " + shape_string(x.shape()) + " and " +
                         shape_string(w.shape()));
  }
  const std::size_t k = w.dim(0), n = w.dim(1);
  const std::size_t m = x.size() / k;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  std::vector<double> out(m * n, 0.0);
  gemm_nn(x.data().data(), w.data().data(), out.data(), m, k, n);
  return Tensor::make_result(std::move(out_shape), std::move(out), "matmul_last", {x, w}, [m, k, n](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    if (px.requires_grad) gemm_nt(self.grad.data(), pw.data.data(), px.ensure_grad().data(), m, n, k);
    if (pw.requires_grad) gemm_tn(px.data.data(), self.grad.data(), pw.ensure_grad().data(), k, m, n);
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1))) {
    throw DimensionError("bmm: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + (transpose_b ? " (transposed)" : ""));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* ap = a.data().data() + s * m * k;
    const double* bp = b.data().data() + s * k * n;
    double* cp = out.data() + s * m * n;
    if (transpose_b) {
      gemm_nt(ap, bp, cp, m, k, n);
    } else {
      gemm_nn(ap, bp, cp, m, k, n);
    }
  }
  return Tensor::make_result({batch, m, n}, std::move(out), "bmm", {a, b}, [=](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    double* ga = pa.requires_grad ? pa.ensure_grad().data() : nullptr;
    double* gb = pb.requires_grad ? pb.ensure_grad().data() : nullptr;
    for (std::size_t s = 0; s < batch; ++s) {
      const double* gc = self.grad.data() + s * m * n;
      const double* ap = pa.data.data() + s * m * k;
      const double* bp = pb.data.data() + s * k * n;
      if (transpose_b) {
        // C = A B^T, B is [n x k]
        if (ga) gemm_nn(gc, bp, ga + s * m * k, m, n, k);
        if (gb) gemm_tn(gc, ap, gb + s * k * n, n, m, k);
      } else {
        if (ga) gemm_nt(gc, bp, ga + s * m * k, m, n, k);
        if (gb) gemm_tn(ap, gc, gb + s * k * n, k, m, n);
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), "reshape", {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, std::span<const std::size_t> axes) {
  const std::size_t rank = x.rank();
  if (axes.size() != rank) throw DimensionError("permute: axis count does not match rank");
  std::vector<bool> seen(rank, false);
  for (std::size_t a : axes) {
    if (a >= rank || seen[a]) throw DimensionError("permute: axes are not a permutation");
    seen[a] = true;
  }
  const Shape& in_shape = x.shape();
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  Shape out_shape(rank);
  std::vector<std::size_t> src_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in_shape[axes[i]];
    src_strides[i] = in_strides[axes[i]];
  }
  // map[out_index] = in_index
  std::vector<std::size_t> map(x.size());
  std::vector<std::size_t> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < map.size(); ++o) {
    map[o] = src;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      src += src_strides[d];
      if (counter[d] < out_shape[d]) break;
      src -= src_strides[d] * out_shape[d];
      counter[d] = 0;
    }
  }
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = x.data()[map[o]];
  return Tensor::make_result(std::move(out_shape), std::move(out), "permute", {x},
                             [map = std::move(map)](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t o = 0; o < map.size(); ++o) g[map[o]] += self.grad[o];
                             });
}

Tensor permute(const Tensor& x, std::initializer_list<std::size_t> axes) {
  return permute(x, std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  if (x.rank() < 1) throw DimensionError("gather_rows: scalar input");
  const std::size_t rows = x.dim(0);
  const std::size_t width = rows ? x.size() / rows : 0;
  Shape out_shape = x.shape();
  out_shape[0] = indices.size();
  std::vector<double> out(indices.size() * width);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows) throw DimensionError("gather_rows: index out of range");
    std::copy_n(x.data().begin() + indices[r] * width, width, out.begin() + r * width);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::make_result(std::move(out_shape), std::move(out), "gather_rows", {x},
                             [idx = std::move(idx), width](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                 double* dst = g.data() + idx[r] * width;
                                 const double* src = self.grad.data() + r * width;
                                 for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
                               }
                             });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_string(x.shape()));
  }
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * len * inner + j;
      double peak = in[base];
      for (std::size_t i = 1; i < len; ++i) peak = std::max(peak, in[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double e = std::exp(in[base + i * inner] - peak);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner] /= total;
    }
  }
  return Tensor::make_result(s, std::move(out), "softmax", {x}, [outer, inner, len](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * len * inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += self.grad[base + i * inner] * self.data[base + i * inner];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t at = base + i * inner;
          g[at] += self.data[at] * (self.grad[at] - dot);
        }
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, "gelu", [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  const std::size_t width = x.shape().back();
  if (gain.size() != width || shift.size() != width) {
    throw DimensionError("layer_norm: gain/shift width does not match last axis of " + shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / width;
  std::vector<double> out(x.size());
  std::vector<double> normed(x.size());
  std::vector<double> inv_std(rows);
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * width;
    double mu = 0.0;
    for (std::size_t j = 0; j < width; ++j) mu += row[j];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(width);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) {
      const double xh = (row[j] - mu) * inv_std[r];
      normed[r * width + j] = xh;
      out[r * width + j] = xh * gain.data()[j] + shift.data()[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), "layer_norm", {x, gain, shift},
      [rows, width, normed = std::move(normed), inv_std = std::move(inv_std)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        if (pg.requires_grad || pb.requires_grad) {
          auto& gg = pg.ensure_grad();
          auto& gb = pb.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < width; ++j) {
              gg[j] += self.grad[r * width + j] * normed[r * width + j];
              gb[j] += self.grad[r * width + j];
            }
          }
        }
        if (!px.requires_grad) return;
        auto& gx = px.ensure_grad();
        const double n = static_cast<double>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < width; ++j) {
            const double d = self.grad[r * width + j] * pg.data[j];
            mean_d += d;
            mean_dx += d * normed[r * width + j];
          }
          mean_d /= n;
          mean_dx /= n;
          for (std::size_t j = 0; j < width; ++j) {
            const double d = self.grad[r * width + j] * pg.data[j];
            gx[r * width + j] += inv_std[r] * (d - mean_d - normed[r * width + j] * mean_dx);
          }
        }
      });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ContractViolation("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = keep(rng) ? factor : 0.0;
    out[i] = x.data()[i] * mask[i];
  }
  return Tensor::make_result(x.shape(), std::move(out), "dropout", {x}, [mask = std::move(mask)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result({1}, {total}, "sum", {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ContractViolation("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor l2_norm(const Tensor& x) {
  if (x.size() == 0) throw ContractViolation("l2_norm of empty tensor");
  double ss = 0.0;
  for (double v : x.data()) ss += v * v;
  return Tensor::make_result({1}, {std::sqrt(ss)}, "l2_norm", {x}, [](Node& self) {
    const double norm = self.data[0];
    if (norm == 0.0) return;
    auto& g = self.parents[0]->ensure_grad();
    const double factor = self.grad[0] / norm;
    const auto& xv = self.parents[0]->data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * xv[i];
  });
}

Tensor row_l2_norms(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("row_l2_norms expects [N, K], got " + shape_string(x.shape()));
  const std::size_t rows = x.dim(0), width = x.dim(1);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < width; ++j) ss += x.data()[r * width + j] * x.data()[r * width + j];
    out[r] = std::sqrt(ss);
  }
  return Tensor::make_result({rows}, std::move(out), "row_l2_norms", {x}, [rows, width](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const auto& xv = self.parents[0]->data;
    for (std::size_t r = 0; r < rows; ++r) {
      if (self.data[r] == 0.0) continue;
      const double factor = self.grad[r] / self.data[r];
      for (std::size_t j = 0; j < width; ++j) g[r * width + j] += factor * xv[r * width + j];
    }
  });
}

}  // namespace entransformer
