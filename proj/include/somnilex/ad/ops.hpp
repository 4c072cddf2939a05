#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "somnilex/ad/graph.hpp"
#include "somnilex/ad/tensor.hpp"
#include "somnilex/common.hpp"

namespace somnilex::ad {

template <class S>
using MatMap =
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <class S>
NodePtr<S> add(const NodePtr<S>& a, const NodePtr<S>& b) {
  check(a->value.shape == b->value.shape,
        "add: shape mismatch " + a->value.shape_str() + " vs " +
            b->value.shape_str());
  Tensor<S> out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b->value.data[i];
  return make_node<S>(std::move(out), {a, b}, [a, b](Node<S>& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        a->grad.data[i] += self.grad.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        b->grad.data[i] += self.grad.data[i];
    }
  });
}

template <class S>
NodePtr<S> mul(const NodePtr<S>& a, const NodePtr<S>& b) {
  check(a->value.shape == b->value.shape,
        "mul: shape mismatch " + a->value.shape_str() + " vs " +
            b->value.shape_str());
  Tensor<S> out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b->value.data[i];
  return make_node<S>(std::move(out), {a, b}, [a, b](Node<S>& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        a->grad.data[i] += self.grad.data[i] * b->value.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        b->grad.data[i] += self.grad.data[i] * a->value.data[i];
    }
  });
}

template <class S>
NodePtr<S> scale(const NodePtr<S>& a, double c) {
  Tensor<S> out = a->value;
  for (auto& v : out.data) v = static_cast<S>(v * c);
  return make_node<S>(std::move(out), {a}, [a, c](Node<S>& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      a->grad.data[i] += static_cast<S>(self.grad.data[i] * c);
  });
}

template <class S>
NodePtr<S> relu(const NodePtr<S>& a) {
  Tensor<S> out = a->value;
  for (auto& v : out.data) v = v > S(0) ? v : S(0);
  return make_node<S>(std::move(out), {a}, [a](Node<S>& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      if (a->value.data[i] > S(0)) a->grad.data[i] += self.grad.data[i];
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <class S>
NodePtr<S> reshape(const NodePtr<S>& a, std::vector<int> shape) {
  check(Tensor<S>::numel_of(shape) == a->value.numel(),
        "reshape: cannot view " + a->value.shape_str() + " as new shape");
  Tensor<S> out(shape, a->value.data);
  return make_node<S>(std::move(out), {a}, [a](Node<S>& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      a->grad.data[i] += self.grad.data[i];
  });
}

namespace perm_detail {

inline std::vector<std::size_t> contiguous_strides(const std::vector<int>& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * static_cast<std::size_t>(shape[i + 1]);
  return st;
}

// out[j] = in[map(j)] where map decodes j in the permuted shape and re-linearizes
// in the source layout.
template <class S>
void permute_copy(const std::vector<S>& in, const std::vector<int>& in_shape,
                  const std::vector<int>& perm, std::vector<S>& out,
                  bool accumulate) {
  const int nd = static_cast<int>(in_shape.size());
  std::vector<int> out_shape(nd);
  for (int i = 0; i < nd; ++i) out_shape[i] = in_shape[perm[i]];
  const auto in_strides = contiguous_strides(in_shape);
  std::vector<std::size_t> gather(nd);
  for (int i = 0; i < nd; ++i) gather[i] = in_strides[perm[i]];

  std::vector<int> idx(nd, 0);
  const std::size_t n = in.size();
  std::size_t src = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (accumulate)
      out[src] += in[j];
    else
      out[j] = in[src];
    // increment odometer over out_shape, updating src
    for (int d = nd - 1; d >= 0; --d) {
      src += gather[d];
      if (++idx[d] < out_shape[d]) break;
      src -= gather[d] * static_cast<std::size_t>(out_shape[d]);
      idx[d] = 0;
    }
  }
}

}  // namespace perm_detail

template <class S>
NodePtr<S> permute(const NodePtr<S>& a, std::vector<int> perm) {
  const auto& shape = a->value.shape;
  check(perm.size() == shape.size(), "permute: axis count mismatch");
  std::vector<int> out_shape(shape.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = shape[perm[i]];
  Tensor<S> out(out_shape);
  perm_detail::permute_copy(a->value.data, shape, perm, out.data, false);
  return make_node<S>(std::move(out), {a}, [a, perm](Node<S>& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    // scatter: grad_in[map(j)] += grad_out[j]
    perm_detail::permute_copy(self.grad.data, a->value.shape, perm,
                              a->grad.data, true);
  });
}

template <class S>
NodePtr<S> concat(const std::vector<NodePtr<S>>& parts, int axis) {
  check(!parts.empty(), "concat: no inputs");
  const auto& ref = parts[0]->value.shape;
  const int nd = static_cast<int>(ref.size());
  check(axis >= 0 && axis < nd, "concat: axis out of range");
  std::vector<int> out_shape = ref;
  int total_axis = 0;
  for (const auto& p : parts) {
    check(p->value.ndim() == nd, "concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis)
        check(p->value.shape[d] == ref[d],
              "concat: shape mismatch off the concat axis");
    total_axis += p->value.shape[axis];
  }
  out_shape[axis] = total_axis;

  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(ref[d]);
  for (int d = axis + 1; d < nd; ++d) inner *= static_cast<std::size_t>(ref[d]);

  Tensor<S> out(out_shape);
  std::size_t dst_axis_offset = 0;
  for (const auto& p : parts) {
    const std::size_t rows = static_cast<std::size_t>(p->value.shape[axis]);
    for (std::size_t o = 0; o < outer; ++o) {
      const S* src = p->value.ptr() + o * rows * inner;
      S* dst = out.ptr() + (o * static_cast<std::size_t>(total_axis) +
                            dst_axis_offset) * inner;
      std::copy(src, src + rows * inner, dst);
    }
    dst_axis_offset += rows;
  }

  std::vector<NodePtr<S>> parent_list = parts;
  return make_node<S>(
      std::move(out), parent_list,
      [parts, axis, outer, inner, total_axis](Node<S>& self) {
        std::size_t src_axis_offset = 0;
        for (const auto& p : parts) {
          const std::size_t rows = static_cast<std::size_t>(p->value.shape[axis]);
          if (p->requires_grad) {
            p->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o) {
              const S* src =
                  self.grad.ptr() +
                  (o * static_cast<std::size_t>(total_axis) + src_axis_offset) *
                      inner;
              S* dst = p->grad.ptr() + o * rows * inner;
              for (std::size_t i = 0; i < rows * inner; ++i) dst[i] += src[i];
            }
          }
          src_axis_offset += rows;
        }
      });
}

template <class S>
NodePtr<S> gather_rows(const NodePtr<S>& a, std::vector<int> indices) {
  check(a->value.ndim() == 2, "gather_rows: expected a 2-D tensor");
  const int rows = a->value.dim(0), cols = a->value.dim(1);
  for (int i : indices)
    check(i >= 0 && i < rows, "gather_rows: index out of range");
  Tensor<S> out({static_cast<int>(indices.size()), cols});
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy(a->value.ptr() + static_cast<std::size_t>(indices[r]) * cols,
              a->value.ptr() + static_cast<std::size_t>(indices[r] + 1) * cols,
              out.ptr() + r * cols);
  return make_node<S>(std::move(out), {a}, [a, indices, cols](Node<S>& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const S* src = self.grad.ptr() + r * cols;
      S* dst = a->grad.ptr() + static_cast<std::size_t>(indices[r]) * cols;
      for (int c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

// Broadcast add of a (S0, D) table over the leading axis of a (B, S0, D)
// batch: the learned positional table lookup.
template <class S>
NodePtr<S> add_rows(const NodePtr<S>& x, const NodePtr<S>& table) {
  check(x->value.ndim() == 3 && table->value.ndim() == 2,
        "add_rows: expected (B,S,D) and (S,D)");
  const int B = x->value.dim(0), S0 = x->value.dim(1), D = x->value.dim(2);
  check(table->value.dim(0) == S0 && table->value.dim(1) == D,
        "add_rows: table shape " + table->value.shape_str() +
            " does not match sequence " + x->value.shape_str());
  Tensor<S> out = x->value;
  const std::size_t plane = static_cast<std::size_t>(S0) * D;
  for (int b = 0; b < B; ++b)
    for (std::size_t i = 0; i < plane; ++i)
      out.data[b * plane + i] += table->value.data[i];
  return make_node<S>(
      std::move(out), {x, table}, [x, table, B, plane](Node<S>& self) {
        if (x->requires_grad) {
          x->ensure_grad();
          for (std::size_t i = 0; i < self.grad.numel(); ++i)
            x->grad.data[i] += self.grad.data[i];
        }
        if (table->requires_grad) {
          table->ensure_grad();
          for (int b = 0; b < B; ++b)
            for (std::size_t i = 0; i < plane; ++i)
              table->grad.data[i] += self.grad.data[b * plane + i];
        }
      });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <class S>
NodePtr<S> matmul(const NodePtr<S>& a, const NodePtr<S>& b) {
  check(a->value.ndim() == 2 && b->value.ndim() == 2, "matmul: expected 2-D");
  const int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
  check(b->value.dim(0) == k, "matmul: inner dimensions " +
                                  a->value.shape_str() + " x " +
                                  b->value.shape_str() + " do not agree");
  Tensor<S> out({m, n});
  MatMap<S>(out.ptr(), m, n).noalias() =
      ConstMatMap<S>(a->value.ptr(), m, k) * ConstMatMap<S>(b->value.ptr(), k, n);
  return make_node<S>(std::move(out), {a, b}, [a, b, m, k, n](Node<S>& self) {
    ConstMatMap<S> g(self.grad.ptr(), m, n);
    if (a->requires_grad) {
      a->ensure_grad();
      MatMap<S>(a->grad.ptr(), m, k).noalias() +=
          g * ConstMatMap<S>(b->value.ptr(), k, n).transpose();
    }
    if (b->requires_grad) {
      b->ensure_grad();
      MatMap<S>(b->grad.ptr(), k, n).noalias() +=
          ConstMatMap<S>(a->value.ptr(), m, k).transpose() * g;
    }
  });
}

// Batched matmul: (B,m,k) x (B,k,n) -> (B,m,n).
template <class S>
NodePtr<S> bmm(const NodePtr<S>& a, const NodePtr<S>& b) {
  check(a->value.ndim() == 3 && b->value.ndim() == 3, "bmm: expected 3-D");
  const int B = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2);
  const int n = b->value.dim(2);
  check(b->value.dim(0) == B && b->value.dim(1) == k,
        "bmm: batch shapes " + a->value.shape_str() + " x " +
            b->value.shape_str() + " do not agree");
  Tensor<S> out({B, m, n});
  for (int i = 0; i < B; ++i)
    MatMap<S>(out.ptr() + static_cast<std::size_t>(i) * m * n, m, n).noalias() =
        ConstMatMap<S>(a->value.ptr() + static_cast<std::size_t>(i) * m * k, m, k) *
        ConstMatMap<S>(b->value.ptr() + static_cast<std::size_t>(i) * k * n, k, n);
  return make_node<S>(std::move(out), {a, b}, [a, b, B, m, k, n](Node<S>& self) {
    for (int i = 0; i < B; ++i) {
      ConstMatMap<S> g(self.grad.ptr() + static_cast<std::size_t>(i) * m * n, m, n);
      if (a->requires_grad) {
        a->ensure_grad();
        MatMap<S>(a->grad.ptr() + static_cast<std::size_t>(i) * m * k, m, k)
            .noalias() +=
            g *
            ConstMatMap<S>(b->value.ptr() + static_cast<std::size_t>(i) * k * n,
                           k, n)
                .transpose();
      }
      if (b->requires_grad) {
        b->ensure_grad();
        MatMap<S>(b->grad.ptr() + static_cast<std::size_t>(i) * k * n, k, n)
            .noalias() +=
            ConstMatMap<S>(a->value.ptr() + static_cast<std::size_t>(i) * m * k,
                           m, k)
                .transpose() *
            g;
      }
    }
  });
}

// Affine map y = x W + b for x (N, d_in), W (d_in, d_out), b (d_out).
template <class S>
NodePtr<S> linear(const NodePtr<S>& x, const NodePtr<S>& w, const NodePtr<S>& b) {
  check(x->value.ndim() == 2 && w->value.ndim() == 2, "linear: expected 2-D");
  const int n = x->value.dim(0), din = x->value.dim(1), dout = w->value.dim(1);
  check(w->value.dim(0) == din, "linear: input width " + x->value.shape_str() +
                                    " does not match weight " +
                                    w->value.shape_str());
  check(!b || (b->value.ndim() == 1 && b->value.dim(0) == dout),
        "linear: bias shape mismatch");
  Tensor<S> out({n, dout});
  MatMap<S> o(out.ptr(), n, dout);
  o.noalias() = ConstMatMap<S>(x->value.ptr(), n, din) *
                ConstMatMap<S>(w->value.ptr(), din, dout);
  if (b)
    o.rowwise() +=
        Eigen::Map<const Eigen::RowVector<S, Eigen::Dynamic>>(b->value.ptr(), dout);
  std::vector<NodePtr<S>> parents = b ? std::vector<NodePtr<S>>{x, w, b}
                                      : std::vector<NodePtr<S>>{x, w};
  return make_node<S>(
      std::move(out), parents, [x, w, b, n, din, dout](Node<S>& self) {
        ConstMatMap<S> g(self.grad.ptr(), n, dout);
        if (x->requires_grad) {
          x->ensure_grad();
          MatMap<S>(x->grad.ptr(), n, din).noalias() +=
              g * ConstMatMap<S>(w->value.ptr(), din, dout).transpose();
        }
        if (w->requires_grad) {
          w->ensure_grad();
          MatMap<S>(w->grad.ptr(), din, dout).noalias() +=
              ConstMatMap<S>(x->value.ptr(), n, din).transpose() * g;
        }
        if (b && b->requires_grad) {
          b->ensure_grad();
          Eigen::Map<Eigen::RowVector<S, Eigen::Dynamic>>(b->grad.ptr(), dout) +=
              g.colwise().sum();
        }
      });
}

// ---------------------------------------------------------------------------
// Convolution and pooling
// ---------------------------------------------------------------------------

// Left/right padding that keeps out_len == len for stride 1:
// floor((k-1)/2) on the left, ceil((k-1)/2) on the right.
struct SamePad {
  int left, right;
};
inline SamePad same_padding(int kernel) {
  const int left = (kernel - 1) / 2;
  return {left, (kernel - 1) - left};
}

namespace conv_detail {

// Gathers the im2col rows of one sample into `cols` (Lout, Cin*K): row l
// holds the padded receptive field starting at l*stride for every input
// channel. Contiguous runs are copied; the padded fringes are filled
// explicitly.
template <class S>
void im2col_sample(const S* x, int Cin, int L, int K, int stride, int pad_l,
                   int Lout, S* cols) {
  for (int l = 0; l < Lout; ++l) {
    S* row = cols + static_cast<std::size_t>(l) * Cin * K;
    const int begin = l * stride - pad_l;  // may be negative
    for (int ci = 0; ci < Cin; ++ci) {
      const S* src = x + static_cast<std::size_t>(ci) * L;
      S* dst = row + static_cast<std::size_t>(ci) * K;
      const int lo = std::max(0, -begin);
      const int hi = std::min(K, L - begin);
      for (int t = 0; t < lo; ++t) dst[t] = S(0);
      for (int t = std::max(lo, 0); t < hi; ++t) dst[t] = src[begin + t];
      for (int t = std::max(hi, 0); t < K; ++t) dst[t] = S(0);
    }
  }
}

// Scatter-add of im2col-layout gradients back onto one sample.
template <class S>
void col2im_sample(const S* cols, int Cin, int L, int K, int stride, int pad_l,
                   int Lout, S* gx) {
  for (int l = 0; l < Lout; ++l) {
    const S* row = cols + static_cast<std::size_t>(l) * Cin * K;
    const int begin = l * stride - pad_l;
    for (int ci = 0; ci < Cin; ++ci) {
      S* dst = gx + static_cast<std::size_t>(ci) * L;
      const S* src = row + static_cast<std::size_t>(ci) * K;
      const int lo = std::max(0, -begin);
      const int hi = std::min(K, L - begin);
      for (int t = lo; t < hi; ++t) dst[begin + t] += src[t];
    }
  }
}

}  // namespace conv_detail

// 1-D cross-correlation of x (N, Cin, L) with kernels (Cout, Cin, K); output
// (N, Cout, Lout) with Lout = (L + pad_l + pad_r - K)/stride + 1. Realized
// as im2col plus GEMM in blocks of samples, forward and backward.
template <class S>
NodePtr<S> conv1d(const NodePtr<S>& x, const NodePtr<S>& w, const NodePtr<S>& b,
                  int stride = 1, int pad_l = 0, int pad_r = 0) {
  check(x->value.ndim() == 3 && w->value.ndim() == 3,
        "conv1d: expected x (N,Cin,L) and w (Cout,Cin,K)");
  const int N = x->value.dim(0), Cin = x->value.dim(1), L = x->value.dim(2);
  const int Cout = w->value.dim(0), K = w->value.dim(2);
  check(w->value.dim(1) == Cin, "conv1d: channel mismatch, x " +
                                    x->value.shape_str() + " vs w " +
                                    w->value.shape_str());
  check(stride >= 1, "conv1d: stride must be positive");
  const int Lp = L + pad_l + pad_r;
  check(K <= Lp, "conv1d: kernel K=" + std::to_string(K) +
                     " longer than padded input " + std::to_string(Lp));
  check(!b || (b->value.ndim() == 1 && b->value.dim(0) == Cout),
        "conv1d: bias shape mismatch");
  const int Lout = (Lp - K) / stride + 1;
  const int CK = Cin * K;
  // Sample blocking keeps the im2col buffer around a few megabytes.
  const int block = std::max(1, static_cast<int>(
                                    (2u << 20) / (static_cast<std::size_t>(Lout) * CK)));

  Tensor<S> out({N, Cout, Lout});
  {
    std::vector<S> cols(static_cast<std::size_t>(block) * Lout * CK);
    std::vector<S> prod(static_cast<std::size_t>(block) * Lout * Cout);
    ConstMatMap<S> wmat(w->value.ptr(), Cout, CK);
    for (int n0 = 0; n0 < N; n0 += block) {
      const int bs = std::min(block, N - n0);
      for (int i = 0; i < bs; ++i)
        conv_detail::im2col_sample(
            x->value.ptr() + (static_cast<std::size_t>(n0) + i) * Cin * L, Cin,
            L, K, stride, pad_l, Lout,
            cols.data() + static_cast<std::size_t>(i) * Lout * CK);
      const int rows = bs * Lout;
      MatMap<S>(prod.data(), rows, Cout).noalias() =
          ConstMatMap<S>(cols.data(), rows, CK) * wmat.transpose();
      // transpose (rows, Cout) slices into the (N, Cout, Lout) layout
      for (int i = 0; i < bs; ++i) {
        const S* p = prod.data() + static_cast<std::size_t>(i) * Lout * Cout;
        S* o = out.ptr() + (static_cast<std::size_t>(n0) + i) * Cout * Lout;
        for (int co = 0; co < Cout; ++co) {
          const S bias = b ? b->value.data[co] : S(0);
          S* orow = o + static_cast<std::size_t>(co) * Lout;
          for (int l = 0; l < Lout; ++l) orow[l] = p[static_cast<std::size_t>(l) * Cout + co] + bias;
        }
      }
    }
  }

  std::vector<NodePtr<S>> parents = b ? std::vector<NodePtr<S>>{x, w, b}
                                      : std::vector<NodePtr<S>>{x, w};
  return make_node<S>(std::move(out), parents, [x, w, b, N, Cin, L, Cout, K,
                                                stride, pad_l, CK, block,
                                                Lout](Node<S>& self) {
    if (b && b->requires_grad) {
      b->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co) {
          const S* g = self.grad.ptr() + (static_cast<std::size_t>(n) * Cout + co) * Lout;
          S acc = S(0);
          for (int l = 0; l < Lout; ++l) acc += g[l];
          b->grad.data[co] += acc;
        }
    }
    const bool need_x = x->requires_grad;
    const bool need_w = w->requires_grad;
    if (!need_x && !need_w) return;
    if (need_x) x->ensure_grad();
    if (need_w) w->ensure_grad();

    std::vector<S> cols(static_cast<std::size_t>(block) * Lout * CK);
    std::vector<S> g2(static_cast<std::size_t>(block) * Lout * Cout);
    std::vector<S> gcols(need_x ? cols.size() : 0);
    ConstMatMap<S> wmat(w->value.ptr(), Cout, CK);
    for (int n0 = 0; n0 < N; n0 += block) {
      const int bs = std::min(block, N - n0);
      const int rows = bs * Lout;
      // grad_out slices transposed to (rows, Cout)
      for (int i = 0; i < bs; ++i) {
        const S* g = self.grad.ptr() + (static_cast<std::size_t>(n0) + i) * Cout * Lout;
        S* dst = g2.data() + static_cast<std::size_t>(i) * Lout * Cout;
        for (int co = 0; co < Cout; ++co) {
          const S* grow = g + static_cast<std::size_t>(co) * Lout;
          for (int l = 0; l < Lout; ++l)
            dst[static_cast<std::size_t>(l) * Cout + co] = grow[l];
        }
      }
      if (need_w) {
        for (int i = 0; i < bs; ++i)
          conv_detail::im2col_sample(
              x->value.ptr() + (static_cast<std::size_t>(n0) + i) * Cin * L,
              Cin, L, K, stride, pad_l, Lout,
              cols.data() + static_cast<std::size_t>(i) * Lout * CK);
        MatMap<S>(w->grad.ptr(), Cout, CK).noalias() +=
            ConstMatMap<S>(g2.data(), rows, Cout).transpose() *
            ConstMatMap<S>(cols.data(), rows, CK);
      }
      if (need_x) {
        MatMap<S>(gcols.data(), rows, CK).noalias() =
            ConstMatMap<S>(g2.data(), rows, Cout) * wmat;
        for (int i = 0; i < bs; ++i)
          conv_detail::col2im_sample(
              gcols.data() + static_cast<std::size_t>(i) * Lout * CK, Cin, L,
              K, stride, pad_l, Lout,
              x->grad.ptr() + (static_cast<std::size_t>(n0) + i) * Cin * L);
      }
    }
  });
}

template <class S>
NodePtr<S> maxpool1d(const NodePtr<S>& x, int k, int stride) {
  check(x->value.ndim() == 3, "maxpool1d: expected (N,C,L)");
  const int N = x->value.dim(0), C = x->value.dim(1), L = x->value.dim(2);
  check(k >= 1 && stride >= 1 && k <= L, "maxpool1d: bad window");
  const int Lout = (L - k) / stride + 1;
  Tensor<S> out({N, C, Lout});
  auto argmax = std::make_shared<std::vector<int>>(out.numel());
  for (int nc = 0; nc < N * C; ++nc) {
    const S* row = x->value.ptr() + static_cast<std::size_t>(nc) * L;
    S* y = out.ptr() + static_cast<std::size_t>(nc) * Lout;
    int* am = argmax->data() + static_cast<std::size_t>(nc) * Lout;
    for (int l = 0; l < Lout; ++l) {
      int best = l * stride;
      S bv = row[best];
      for (int t = 1; t < k; ++t)
        if (row[l * stride + t] > bv) {
          bv = row[l * stride + t];
          best = l * stride + t;
        }
      y[l] = bv;
      am[l] = best;
    }
  }
  return make_node<S>(std::move(out), {x}, [x, argmax, L, Lout](Node<S>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    const int rows = static_cast<int>(self.grad.numel()) / Lout;
    for (int nc = 0; nc < rows; ++nc) {
      const S* g = self.grad.ptr() + static_cast<std::size_t>(nc) * Lout;
      const int* am = argmax->data() + static_cast<std::size_t>(nc) * Lout;
      S* gx = x->grad.ptr() + static_cast<std::size_t>(nc) * L;
      for (int l = 0; l < Lout; ++l) gx[am[l]] += g[l];
    }
  });
}

// Adaptive average pooling to a single output position: the mean over the
// last axis, (N,C,L) -> (N,C).
template <class S>
NodePtr<S> mean_lastdim(const NodePtr<S>& x) {
  check(x->value.ndim() >= 2, "mean_lastdim: need at least 2 dims");
  const int L = x->value.shape.back();
  check(L > 0, "mean_lastdim: empty last axis");
  std::vector<int> out_shape(x->value.shape.begin(), x->value.shape.end() - 1);
  Tensor<S> out(out_shape);
  const std::size_t rows = out.numel();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* row = x->value.ptr() + r * L;
    S acc = S(0);
    for (int l = 0; l < L; ++l) acc += row[l];
    out.data[r] = acc / static_cast<S>(L);
  }
  return make_node<S>(std::move(out), {x}, [x, L, rows](Node<S>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const S g = self.grad.data[r] / static_cast<S>(L);
      S* gx = x->grad.ptr() + r * L;
      for (int l = 0; l < L; ++l) gx[l] += g;
    }
  });
}

// Mean over the middle axis of (B, T, D) -> (B, D): sequence pooling.
template <class S>
NodePtr<S> mean_axis1(const NodePtr<S>& x) {
  check(x->value.ndim() == 3, "mean_axis1: expected (B,T,D)");
  const int B = x->value.dim(0), T = x->value.dim(1), D = x->value.dim(2);
  check(T > 0, "mean_axis1: empty axis");
  Tensor<S> out({B, D});
  for (int b = 0; b < B; ++b) {
    S* o = out.ptr() + static_cast<std::size_t>(b) * D;
    for (int t = 0; t < T; ++t) {
      const S* row = x->value.ptr() + (static_cast<std::size_t>(b) * T + t) * D;
      for (int d = 0; d < D; ++d) o[d] += row[d];
    }
    for (int d = 0; d < D; ++d) o[d] /= static_cast<S>(T);
  }
  return make_node<S>(std::move(out), {x}, [x, B, T, D](Node<S>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int b = 0; b < B; ++b) {
      const S* g = self.grad.ptr() + static_cast<std::size_t>(b) * D;
      for (int t = 0; t < T; ++t) {
        S* gx = x->grad.ptr() + (static_cast<std::size_t>(b) * T + t) * D;
        for (int d = 0; d < D; ++d) gx[d] += g[d] / static_cast<S>(T);
      }
    }
  });
}

template <class S>
NodePtr<S> sum_all(const NodePtr<S>& x) {
  S acc = S(0);
  for (const S& v : x->value.data) acc += v;
  Tensor<S> out({1});
  out.data[0] = acc;
  return make_node<S>(std::move(out), {x}, [x](Node<S>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    const S g = self.grad.data[0];
    for (auto& v : x->grad.data) v += g;
  });
}

template <class S>
NodePtr<S> mean_all(const NodePtr<S>& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x->value.numel()));
}

// ---------------------------------------------------------------------------
// Normalization and nonlinear heads
// ---------------------------------------------------------------------------

template <class S>
NodePtr<S> softmax_lastdim(const NodePtr<S>& x) {
  const int K = x->value.shape.back();
  check(K > 0, "softmax: empty last axis");
  Tensor<S> out = x->value;
  const std::size_t rows = out.numel() / K;
  for (std::size_t r = 0; r < rows; ++r) {
    S* row = out.ptr() + r * K;
    S m = row[0];
    for (int i = 1; i < K; ++i) m = std::max(m, row[i]);
    S z = S(0);
    for (int i = 0; i < K; ++i) {
      row[i] = std::exp(row[i] - m);
      z += row[i];
    }
    for (int i = 0; i < K; ++i) row[i] /= z;
  }
  return make_node<S>(std::move(out), {x}, [x, K, rows](Node<S>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const S* y = self.value.ptr() + r * K;
      const S* g = self.grad.ptr() + r * K;
      S dot = S(0);
      for (int i = 0; i < K; ++i) dot += g[i] * y[i];
      S* gx = x->grad.ptr() + r * K;
      for (int i = 0; i < K; ++i) gx[i] += y[i] * (g[i] - dot);
    }
  });
}

// Layer normalization over the last axis with learned gain/bias.
template <class S>
NodePtr<S> layer_norm(const NodePtr<S>& x, const NodePtr<S>& gamma,
                      const NodePtr<S>& beta, double eps = 1e-5) {
  const int D = x->value.shape.back();
  check(gamma->value.ndim() == 1 && gamma->value.dim(0) == D &&
            beta->value.ndim() == 1 && beta->value.dim(0) == D,
        "layer_norm: gain/bias must be (D)");
  const std::size_t rows = x->value.numel() / D;
  Tensor<S> out = x->value;
  auto xhat = std::make_shared<Tensor<S>>(x->value.shape);
  auto inv_std = std::make_shared<std::vector<S>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* row = x->value.ptr() + r * D;
    S mean = S(0);
    for (int i = 0; i < D; ++i) mean += row[i];
    mean /= static_cast<S>(D);
    S var = S(0);
    for (int i = 0; i < D; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= static_cast<S>(D);
    const S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
    (*inv_std)[r] = inv;
    S* h = xhat->ptr() + r * D;
    S* o = out.ptr() + r * D;
    for (int i = 0; i < D; ++i) {
      h[i] = (row[i] - mean) * inv;
      o[i] = gamma->value.data[i] * h[i] + beta->value.data[i];
    }
  }
  return make_node<S>(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, D, rows](Node<S>& self) {
        if (gamma->requires_grad) gamma->ensure_grad();
        if (beta->requires_grad) beta->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        std::vector<S> gh(D);
        for (std::size_t r = 0; r < rows; ++r) {
          const S* g = self.grad.ptr() + r * D;
          const S* h = xhat->ptr() + r * D;
          if (gamma->requires_grad)
            for (int i = 0; i < D; ++i) gamma->grad.data[i] += g[i] * h[i];
          if (beta->requires_grad)
            for (int i = 0; i < D; ++i) beta->grad.data[i] += g[i];
          if (x->requires_grad) {
            S mean_gh = S(0), mean_ghh = S(0);
            for (int i = 0; i < D; ++i) {
              gh[i] = g[i] * gamma->value.data[i];
              mean_gh += gh[i];
              mean_ghh += gh[i] * h[i];
            }
            mean_gh /= static_cast<S>(D);
            mean_ghh /= static_cast<S>(D);
            S* gx = x->grad.ptr() + r * D;
            const S inv = (*inv_std)[r];
            for (int i = 0; i < D; ++i)
              gx[i] += inv * (gh[i] - mean_gh - h[i] * mean_ghh);
          }
        }
      });
}

// Batch normalization over (N, C, L): statistics per channel across batch
// and length. In training mode batch statistics normalize the data and the
// running estimates are updated in place (biased variance is stored, so
// train and eval agree exactly when running statistics equal batch
// statistics). In eval mode the op is a deterministic affine map.
template <class S>
NodePtr<S> batch_norm1d(const NodePtr<S>& x, const NodePtr<S>& gamma,
                        const NodePtr<S>& beta, Tensor<S>& running_mean,
                        Tensor<S>& running_var, bool training,
                        double momentum = 0.1, double eps = 1e-5) {
  check(x->value.ndim() == 3, "batch_norm1d: expected (N,C,L)");
  const int N = x->value.dim(0), C = x->value.dim(1), L = x->value.dim(2);
  check(gamma->value.dim(0) == C && beta->value.dim(0) == C,
        "batch_norm1d: gain/bias must be (C)");
  check(static_cast<int>(running_mean.numel()) == C &&
            static_cast<int>(running_var.numel()) == C,
        "batch_norm1d: running statistics must be (C)");
  const std::size_t M = static_cast<std::size_t>(N) * L;
  check(M > 0, "batch_norm1d: empty batch");

  std::vector<S> mean(C), var(C);
  if (training) {
    for (int c = 0; c < C; ++c) {
      S acc = S(0);
      for (int n = 0; n < N; ++n) {
        const S* row = x->value.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
        for (int l = 0; l < L; ++l) acc += row[l];
      }
      mean[c] = acc / static_cast<S>(M);
      S v = S(0);
      for (int n = 0; n < N; ++n) {
        const S* row = x->value.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
        for (int l = 0; l < L; ++l) v += (row[l] - mean[c]) * (row[l] - mean[c]);
      }
      var[c] = v / static_cast<S>(M);
      running_mean.data[c] = static_cast<S>((1.0 - momentum) * running_mean.data[c] +
                                            momentum * mean[c]);
      running_var.data[c] = static_cast<S>((1.0 - momentum) * running_var.data[c] +
                                           momentum * var[c]);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = running_mean.data[c];
      var[c] = running_var.data[c];
    }
  }

  Tensor<S> out(x->value.shape);
  auto xhat = std::make_shared<Tensor<S>>(x->value.shape);
  auto inv_std = std::make_shared<std::vector<S>>(C);
  for (int c = 0; c < C; ++c)
    (*inv_std)[c] = S(1) / std::sqrt(var[c] + static_cast<S>(eps));
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S* row = x->value.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
      S* h = xhat->ptr() + (static_cast<std::size_t>(n) * C + c) * L;
      S* o = out.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
      const S inv = (*inv_std)[c];
      const S g = gamma->value.data[c], bt = beta->value.data[c];
      const S mu = mean[c];
      for (int l = 0; l < L; ++l) {
        h[l] = (row[l] - mu) * inv;
        o[l] = g * h[l] + bt;
      }
    }

  return make_node<S>(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, N, C, L, M, training](Node<S>& self) {
        if (gamma->requires_grad) gamma->ensure_grad();
        if (beta->requires_grad) beta->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        for (int c = 0; c < C; ++c) {
          S sum_g = S(0), sum_gh = S(0);
          for (int n = 0; n < N; ++n) {
            const S* g = self.grad.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
            const S* h = xhat->ptr() + (static_cast<std::size_t>(n) * C + c) * L;
            for (int l = 0; l < L; ++l) {
              sum_g += g[l];
              sum_gh += g[l] * h[l];
            }
          }
          if (gamma->requires_grad) gamma->grad.data[c] += sum_gh;
          if (beta->requires_grad) beta->grad.data[c] += sum_g;
          if (x->requires_grad) {
            const S gc = gamma->value.data[c];
            const S inv = (*inv_std)[c];
            if (training) {
              const S mean_g = sum_g / static_cast<S>(M);
              const S mean_gh = sum_gh / static_cast<S>(M);
              for (int n = 0; n < N; ++n) {
                const S* g =
                    self.grad.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
                const S* h = xhat->ptr() + (static_cast<std::size_t>(n) * C + c) * L;
                S* gx = x->grad.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
                for (int l = 0; l < L; ++l)
                  gx[l] += gc * inv * (g[l] - mean_g - h[l] * mean_gh);
              }
            } else {
              for (int n = 0; n < N; ++n) {
                const S* g =
                    self.grad.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
                S* gx = x->grad.ptr() + (static_cast<std::size_t>(n) * C + c) * L;
                for (int l = 0; l < L; ++l) gx[l] += gc * inv * g[l];
              }
            }
          }
        }
      });
}

// Inverted dropout. Identity when disabled; otherwise scales kept units by
// 1/(1-p) so eval needs no rescaling.
template <class S>
NodePtr<S> dropout(const NodePtr<S>& x, double p, Rng* rng, bool training) {
  if (!training || p <= 0.0) return x;
  check(p < 1.0, "dropout: p must be < 1");
  check(rng != nullptr, "dropout: training mode requires an RNG");
  auto mask = std::make_shared<std::vector<S>>(x->value.numel());
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  Tensor<S> out = x->value;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const S m = rng->uniform() < p ? S(0) : keep_scale;
    (*mask)[i] = m;
    out.data[i] *= m;
  }
  return make_node<S>(std::move(out), {x}, [x, mask](Node<S>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      x->grad.data[i] += self.grad.data[i] * (*mask)[i];
  });
}

// Mean cross-entropy between logits (B, K) and integer targets, computed in
// the log-sum-exp stabilized form.
template <class S>
NodePtr<S> cross_entropy(const NodePtr<S>& logits,
                         const std::vector<int>& targets,
                         const std::vector<double>* class_weights = nullptr) {
  check(logits->value.ndim() == 2, "cross_entropy: logits must be (B,K)");
  const int B = logits->value.dim(0), K = logits->value.dim(1);
  check(static_cast<int>(targets.size()) == B,
        "cross_entropy: batch size mismatch");
  for (int t : targets)
    if (t < 0 || t >= K)
      throw ConfigError("cross_entropy: target " + std::to_string(t) +
                        " outside [0," + std::to_string(K) + ")");
  check(!class_weights || static_cast<int>(class_weights->size()) == K,
        "cross_entropy: class weight count mismatch");

  auto probs = std::make_shared<Tensor<S>>(logits->value.shape);
  auto weights = std::make_shared<std::vector<S>>(B, S(1));
  S total = S(0), weight_sum = S(0);
  for (int i = 0; i < B; ++i) {
    const S* row = logits->value.ptr() + static_cast<std::size_t>(i) * K;
    S* p = probs->ptr() + static_cast<std::size_t>(i) * K;
    S m = row[0];
    for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
    S z = S(0);
    for (int k = 0; k < K; ++k) {
      p[k] = std::exp(row[k] - m);
      z += p[k];
    }
    for (int k = 0; k < K; ++k) p[k] /= z;
    const S w = class_weights ? static_cast<S>((*class_weights)[targets[i]]) : S(1);
    (*weights)[i] = w;
    weight_sum += w;
    total += w * (std::log(z) + m - row[targets[i]]);
  }
  check(weight_sum > S(0), "cross_entropy: zero total weight");
  Tensor<S> out({1});
  out.data[0] = total / weight_sum;
  auto targets_copy = std::make_shared<std::vector<int>>(targets);
  return make_node<S>(
      std::move(out), {logits},
      [logits, probs, weights, targets_copy, B, K, weight_sum](Node<S>& self) {
        if (!logits->requires_grad) return;
        logits->ensure_grad();
        const S g = self.grad.data[0] / weight_sum;
        for (int i = 0; i < B; ++i) {
          const S* p = probs->ptr() + static_cast<std::size_t>(i) * K;
          S* gx = logits->grad.ptr() + static_cast<std::size_t>(i) * K;
          const S w = (*weights)[i] * g;
          for (int k = 0; k < K; ++k) gx[k] += w * p[k];
          gx[(*targets_copy)[i]] -= w;
        }
      });
}

}  // namespace somnilex::ad
