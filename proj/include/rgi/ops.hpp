#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <vector>

#include "rgi/tensor.hpp"

namespace rgi {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using MapCM = Eigen::Map<const MatRM<T>>;

namespace detail {

template <typename T>
inline void ensure_parent_grads(TensorNode<T>& n) {
  for (auto& p : n.parents)
    if (p->requires_grad) p->ensure_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  RGI_CHECK(a.shape() == b.shape(), "add: shape mismatch");
  auto n = make_op_node<T>(a.shape(), {a.node(), b.node()});
  const T* av = a.data();
  const T* bv = b.data();
  for (int i = 0; i < n->numel(); ++i) n->value[i] = av[i] + bv[i];
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      for (int k = 0; k < 2; ++k) {
        auto& p = *nd.parents[k];
        if (!p.requires_grad) continue;
        for (int i = 0; i < nd.numel(); ++i) p.grad[i] += nd.grad[i];
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  RGI_CHECK(a.shape() == b.shape(), "sub: shape mismatch");
  auto n = make_op_node<T>(a.shape(), {a.node(), b.node()});
  for (int i = 0; i < n->numel(); ++i) n->value[i] = a.data()[i] - b.data()[i];
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& pa = *nd.parents[0];
      auto& pb = *nd.parents[1];
      for (int i = 0; i < nd.numel(); ++i) {
        if (pa.requires_grad) pa.grad[i] += nd.grad[i];
        if (pb.requires_grad) pb.grad[i] -= nd.grad[i];
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  RGI_CHECK(a.shape() == b.shape(), "mul: shape mismatch");
  auto n = make_op_node<T>(a.shape(), {a.node(), b.node()});
  for (int i = 0; i < n->numel(); ++i) n->value[i] = a.data()[i] * b.data()[i];
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& pa = *nd.parents[0];
      auto& pb = *nd.parents[1];
      for (int i = 0; i < nd.numel(); ++i) {
        if (pa.requires_grad) pa.grad[i] += nd.grad[i] * pb.value[i];
        if (pb.requires_grad) pb.grad[i] += nd.grad[i] * pa.value[i];
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  RGI_CHECK(a.shape() == b.shape(), "div: shape mismatch");
  auto n = make_op_node<T>(a.shape(), {a.node(), b.node()});
  for (int i = 0; i < n->numel(); ++i) n->value[i] = a.data()[i] / b.data()[i];
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& pa = *nd.parents[0];
      auto& pb = *nd.parents[1];
      for (int i = 0; i < nd.numel(); ++i) {
        const T inv = T(1) / pb.value[i];
        if (pa.requires_grad) pa.grad[i] += nd.grad[i] * inv;
        if (pb.requires_grad) pb.grad[i] -= nd.grad[i] * pa.value[i] * inv * inv;
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  auto n = make_op_node<T>(a.shape(), {a.node()});
  for (int i = 0; i < n->numel(); ++i) n->value[i] = a.data()[i] + c;
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < nd.numel(); ++i) p.grad[i] += nd.grad[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T c) {
  auto n = make_op_node<T>(a.shape(), {a.node()});
  for (int i = 0; i < n->numel(); ++i) n->value[i] = a.data()[i] * c;
  if (n->requires_grad) {
    n->backward_fn = [c](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < nd.numel(); ++i) p.grad[i] += nd.grad[i] * c;
    };
  }
  return Tensor<T>(n);
}

// a + cb * b
template <typename T>
Tensor<T> add_scaled(const Tensor<T>& a, const Tensor<T>& b, T cb) {
  RGI_CHECK(a.shape() == b.shape(), "add_scaled: shape mismatch");
  auto n = make_op_node<T>(a.shape(), {a.node(), b.node()});
  for (int i = 0; i < n->numel(); ++i) n->value[i] = a.data()[i] + cb * b.data()[i];
  if (n->requires_grad) {
    n->backward_fn = [cb](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& pa = *nd.parents[0];
      auto& pb = *nd.parents[1];
      for (int i = 0; i < nd.numel(); ++i) {
        if (pa.requires_grad) pa.grad[i] += nd.grad[i];
        if (pb.requires_grad) pb.grad[i] += nd.grad[i] * cb;
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  auto n = make_op_node<T>(a.shape(), {a.node()});
  for (int i = 0; i < n->numel(); ++i) n->value[i] = a.data()[i] * a.data()[i];
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < nd.numel(); ++i) p.grad[i] += T(2) * nd.grad[i] * p.value[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sqrt_t(const Tensor<T>& a) {
  auto n = make_op_node<T>(a.shape(), {a.node()});
  for (int i = 0; i < n->numel(); ++i) n->value[i] = std::sqrt(a.data()[i]);
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < nd.numel(); ++i)
        p.grad[i] += nd.grad[i] * T(0.5) / nd.value[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope = T(0.2)) {
  auto n = make_op_node<T>(a.shape(), {a.node()});
  for (int i = 0; i < n->numel(); ++i) {
    const T v = a.data()[i];
    n->value[i] = v >= T(0) ? v : slope * v;
  }
  if (n->requires_grad) {
    n->backward_fn = [slope](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < nd.numel(); ++i)
        p.grad[i] += nd.grad[i] * (p.value[i] >= T(0) ? T(1) : slope);
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sigmoid_t(const Tensor<T>& a) {
  auto n = make_op_node<T>(a.shape(), {a.node()});
  for (int i = 0; i < n->numel(); ++i)
    n->value[i] = T(1) / (T(1) + std::exp(-a.data()[i]));
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < nd.numel(); ++i) {
        const T s = nd.value[i];
        p.grad[i] += nd.grad[i] * s * (T(1) - s);
      }
    };
  }
  return Tensor<T>(n);
}

// clamp to [0,1]; gradient passes only through the interior
template <typename T>
Tensor<T> clamp01(const Tensor<T>& a) {
  auto n = make_op_node<T>(a.shape(), {a.node()});
  for (int i = 0; i < n->numel(); ++i)
    n->value[i] = std::min(T(1), std::max(T(0), a.data()[i]));
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < nd.numel(); ++i)
        if (p.value[i] >= T(0) && p.value[i] <= T(1)) p.grad[i] += nd.grad[i];
    };
  }
  return Tensor<T>(n);
}

// per-element select: mask ? a : b (mask is plain data, not differentiable)
template <typename T>
Tensor<T> where_mask(const std::vector<uint8_t>& mask, const Tensor<T>& a,
                     const Tensor<T>& b) {
  RGI_CHECK(a.shape() == b.shape(), "where_mask: shape mismatch");
  const int per = a.numel() / static_cast<int>(mask.size());
  RGI_CHECK(per * static_cast<int>(mask.size()) == a.numel(),
            "where_mask: mask size must divide tensor size");
  // layout [C, H, W]: mask indexes H*W, broadcast over leading dims
  const int hw = static_cast<int>(mask.size());
  auto n = make_op_node<T>(a.shape(), {a.node(), b.node()});
  for (int c = 0; c < per; ++c)
    for (int i = 0; i < hw; ++i) {
      const int k = c * hw + i;
      n->value[k] = mask[i] ? a.data()[k] : b.data()[k];
    }
  if (n->requires_grad) {
    n->backward_fn = [mask, per, hw](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& pa = *nd.parents[0];
      auto& pb = *nd.parents[1];
      for (int c = 0; c < per; ++c)
        for (int i = 0; i < hw; ++i) {
          const int k = c * hw + i;
          if (mask[i]) {
            if (pa.requires_grad) pa.grad[k] += nd.grad[k];
          } else {
            if (pb.requires_grad) pb.grad[k] += nd.grad[k];
          }
        }
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// reductions / reshaping
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  auto n = make_op_node<T>({1}, {a.node()});
  T s = T(0);
  for (int i = 0; i < a.numel(); ++i) s += a.data()[i];
  n->value[0] = s;
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (size_t i = 0; i < p.value.size(); ++i) p.grad[i] += nd.grad[0];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return mul_scalar(sum_all(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape s) {
  RGI_CHECK(numel_of(s) == a.numel(), "reshape: element count mismatch");
  auto n = make_op_node<T>(std::move(s), {a.node()});
  n->value = a.values();
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (size_t i = 0; i < p.value.size(); ++i) p.grad[i] += nd.grad[i];
    };
  }
  return Tensor<T>(n);
}

// contiguous sub-range of the flattened tensor -> shape [len]
template <typename T>
Tensor<T> slice_flat(const Tensor<T>& a, int offset, int len) {
  RGI_CHECK(offset >= 0 && offset + len <= a.numel(), "slice_flat: out of range");
  auto n = make_op_node<T>({len}, {a.node()});
  std::copy(a.data() + offset, a.data() + offset + len, n->value.begin());
  if (n->requires_grad) {
    n->backward_fn = [offset, len](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < len; ++i) p.grad[offset + i] += nd.grad[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> concat_flat(const std::vector<Tensor<T>>& xs) {
  RGI_CHECK(!xs.empty(), "concat_flat: empty input");
  int total = 0;
  std::vector<typename Tensor<T>::NodePtr> parents;
  for (auto& x : xs) {
    total += x.numel();
    parents.push_back(x.node());
  }
  auto n = make_op_node<T>({total}, std::move(parents));
  int off = 0;
  for (auto& x : xs) {
    std::copy(x.data(), x.data() + x.numel(), n->value.begin() + off);
    off += x.numel();
  }
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      int off2 = 0;
      for (auto& p : nd.parents) {
        if (p->requires_grad)
          for (int i = 0; i < p->numel(); ++i) p->grad[i] += nd.grad[off2 + i];
        off2 += p->numel();
      }
    };
  }
  return Tensor<T>(n);
}

// concat [Ci,H,W] tensors along the channel axis
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  RGI_CHECK(!xs.empty(), "concat_channels: empty input");
  const int h = xs[0].dim(1), w = xs[0].dim(2);
  int c_total = 0;
  std::vector<typename Tensor<T>::NodePtr> parents;
  for (auto& x : xs) {
    RGI_CHECK(x.ndim() == 3 && x.dim(1) == h && x.dim(2) == w,
              "concat_channels: spatial mismatch");
    c_total += x.dim(0);
    parents.push_back(x.node());
  }
  auto n = make_op_node<T>({c_total, h, w}, std::move(parents));
  int off = 0;
  for (auto& x : xs) {
    std::copy(x.data(), x.data() + x.numel(), n->value.begin() + off);
    off += x.numel();
  }
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      int off2 = 0;
      for (auto& p : nd.parents) {
        if (p->requires_grad)
          for (int i = 0; i < p->numel(); ++i) p->grad[i] += nd.grad[off2 + i];
        off2 += p->numel();
      }
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  RGI_CHECK(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
            "matmul: incompatible shapes");
  const int m = a.dim(0), k = a.dim(1), nn = b.dim(1);
  auto n = make_op_node<T>({m, nn}, {a.node(), b.node()});
  MapCM<T> A(a.data(), m, k);
  MapCM<T> B(b.data(), k, nn);
  MapM<T> C(n->value.data(), m, nn);
  C.noalias() = A * B;
  if (n->requires_grad) {
    n->backward_fn = [m, k, nn](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& pa = *nd.parents[0];
      auto& pb = *nd.parents[1];
      MapCM<T> G(nd.grad.data(), m, nn);
      MapCM<T> A2(pa.value.data(), m, k);
      MapCM<T> B2(pb.value.data(), k, nn);
      if (pa.requires_grad) {
        MapM<T> GA(pa.grad.data(), m, k);
        GA.noalias() += G * B2.transpose();
      }
      if (pb.requires_grad) {
        MapM<T> GB(pb.grad.data(), k, nn);
        GB.noalias() += A2.transpose() * G;
      }
    };
  }
  return Tensor<T>(n);
}

// y = W x + b for a single vector x [In]; W [Out,In], b [Out]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  RGI_CHECK(x.ndim() == 1 && w.ndim() == 2 && w.dim(1) == x.dim(0),
            "linear: incompatible shapes");
  const int out = w.dim(0), in = w.dim(1);
  const bool has_b = b.defined();
  std::vector<typename Tensor<T>::NodePtr> parents{x.node(), w.node()};
  if (has_b) parents.push_back(b.node());
  auto n = make_op_node<T>({out}, std::move(parents));
  MapCM<T> W(w.data(), out, in);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> X(x.data(), in);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> Y(n->value.data(), out);
  Y.noalias() = W * X;
  if (has_b)
    for (int i = 0; i < out; ++i) n->value[i] += b.data()[i];
  if (n->requires_grad) {
    n->backward_fn = [out, in, has_b](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& px = *nd.parents[0];
      auto& pw = *nd.parents[1];
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> G(nd.grad.data(), out);
      MapCM<T> W2(pw.value.data(), out, in);
      if (px.requires_grad) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> GX(px.grad.data(), in);
        GX.noalias() += W2.transpose() * G;
      }
      if (pw.requires_grad) {
        MapM<T> GW(pw.grad.data(), out, in);
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> X2(px.value.data(), in);
        GW.noalias() += G * X2.transpose();
      }
      if (has_b && nd.parents[2]->requires_grad) {
        auto& pb = *nd.parents[2];
        for (int i = 0; i < out; ++i) pb.grad[i] += nd.grad[i];
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  RGI_CHECK(a.ndim() == 2, "transpose2d: rank-2 required");
  const int m = a.dim(0), k = a.dim(1);
  auto n = make_op_node<T>({k, m}, {a.node()});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) n->value[j * m + i] = a.data()[i * k + j];
  if (n->requires_grad) {
    n->backward_fn = [m, k](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) p.grad[i * k + j] += nd.grad[j * m + i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
  RGI_CHECK(a.ndim() == 2, "softmax_rows: rank-2 required");
  const int m = a.dim(0), k = a.dim(1);
  auto n = make_op_node<T>({m, k}, {a.node()});
  for (int i = 0; i < m; ++i) {
    const T* row = a.data() + i * k;
    T mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T s = T(0);
    for (int j = 0; j < k; ++j) {
      const T e = std::exp(row[j] - mx);
      n->value[i * k + j] = e;
      s += e;
    }
    const T inv = T(1) / s;
    for (int j = 0; j < k; ++j) n->value[i * k + j] *= inv;
  }
  if (n->requires_grad) {
    n->backward_fn = [m, k](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int i = 0; i < m; ++i) {
        const T* y = nd.value.data() + i * k;
        const T* g = nd.grad.data() + i * k;
        T dot = T(0);
        for (int j = 0; j < k; ++j) dot += y[j] * g[j];
        for (int j = 0; j < k; ++j) p.grad[i * k + j] += y[j] * (g[j] - dot);
      }
    };
  }
  return Tensor<T>(n);
}

// rows of a [M,N] gathered by index -> [K,N]
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int>& idx) {
  RGI_CHECK(a.ndim() == 2, "gather_rows: rank-2 required");
  const int k = static_cast<int>(idx.size()), w = a.dim(1);
  auto n = make_op_node<T>({k, w}, {a.node()});
  for (int i = 0; i < k; ++i)
    std::copy(a.data() + idx[i] * w, a.data() + (idx[i] + 1) * w,
              n->value.begin() + i * w);
  if (n->requires_grad) {
    n->backward_fn = [idx, w](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < w; ++j)
          p.grad[idx[i] * w + j] += nd.grad[i * w + j];
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// image-shaped ops ([C,H,W])
// ---------------------------------------------------------------------------

namespace detail {

// patch-major im2col: out is [P x K], P = Ho*Wo, K = Ci*kh*kw
template <typename T>
void im2col(const T* x, int ci, int h, int w, int kh, int kw, int stride,
            int pad, int ho, int wo, T* cols) {
  const int K = ci * kh * kw;
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      T* dst = cols + (oy * wo + ox) * K;
      int k = 0;
      for (int c = 0; c < ci; ++c) {
        const T* plane = x + c * h * w;
        for (int dy = 0; dy < kh; ++dy) {
          const int iy = oy * stride + dy - pad;
          for (int dx = 0; dx < kw; ++dx, ++k) {
            const int ix = ox * stride + dx - pad;
            dst[k] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                         ? plane[iy * w + ix]
                         : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accum(const T* cols, int ci, int h, int w, int kh, int kw,
                  int stride, int pad, int ho, int wo, T* gx) {
  const int K = ci * kh * kw;
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const T* src = cols + (oy * wo + ox) * K;
      int k = 0;
      for (int c = 0; c < ci; ++c) {
        T* plane = gx + c * h * w;
        for (int dy = 0; dy < kh; ++dy) {
          const int iy = oy * stride + dy - pad;
          for (int dx = 0; dx < kw; ++dx, ++k) {
            const int ix = ox * stride + dx - pad;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w)
              plane[iy * w + ix] += src[k];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int stride = 1, int pad = 1) {
  RGI_CHECK(x.ndim() == 3 && w.ndim() == 4 && w.dim(1) == x.dim(0),
            "conv2d: incompatible shapes");
  const int ci = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (ww + 2 * pad - kw) / stride + 1;
  const int P = ho * wo, K = ci * kh * kw;
  const bool has_b = bias.defined();
  std::vector<typename Tensor<T>::NodePtr> parents{x.node(), w.node()};
  if (has_b) parents.push_back(bias.node());
  auto n = make_op_node<T>({co, ho, wo}, std::move(parents));

  std::vector<T> cols(static_cast<size_t>(P) * K);
  detail::im2col(x.data(), ci, h, ww, kh, kw, stride, pad, ho, wo, cols.data());
  MapCM<T> C(cols.data(), P, K);
  MapCM<T> W(w.data(), co, K);
  MatRM<T> Yt = C * W.transpose();  // [P, co]
  for (int c = 0; c < co; ++c) {
    const T b = has_b ? bias.data()[c] : T(0);
    T* out = n->value.data() + c * P;
    for (int p = 0; p < P; ++p) out[p] = Yt(p, c) + b;
  }
  if (n->requires_grad) {
    n->backward_fn = [ci, h, ww, co, kh, kw, stride, pad, ho, wo, has_b](
                         TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      const int P2 = ho * wo, K2 = ci * kh * kw;
      auto& px = *nd.parents[0];
      auto& pw = *nd.parents[1];
      // dYt [P, co]
      MatRM<T> Gt(P2, co);
      for (int c = 0; c < co; ++c)
        for (int p = 0; p < P2; ++p) Gt(p, c) = nd.grad[c * P2 + p];
      std::vector<T> cols2(static_cast<size_t>(P2) * K2);
      detail::im2col(px.value.data(), ci, h, ww, kh, kw, stride, pad, ho, wo,
                     cols2.data());
      MapCM<T> C2(cols2.data(), P2, K2);
      if (pw.requires_grad) {
        MapM<T> GW(pw.grad.data(), co, K2);
        GW.noalias() += Gt.transpose() * C2;
      }
      if (px.requires_grad) {
        MapCM<T> W2(pw.value.data(), co, K2);
        MatRM<T> Gcols = Gt * W2;  // [P, K]
        detail::col2im_accum(Gcols.data(), ci, h, ww, kh, kw, stride, pad, ho,
                             wo, px.grad.data());
      }
      if (has_b && nd.parents[2]->requires_grad) {
        auto& pb = *nd.parents[2];
        for (int c = 0; c < co; ++c) {
          T s = T(0);
          for (int p = 0; p < P2; ++p) s += nd.grad[c * P2 + p];
          pb.grad[c] += s;
        }
      }
    };
  }
  return Tensor<T>(n);
}

// Regional convolution: one 3x3 kernel per active region, outputs composited
// by the label map. Output pixels of region j depend only on kernels[j], so
// per-region style edits stay local by construction. Shared im2col keeps the
// total GEMM cost at a single full convolution.
template <typename T>
Tensor<T> masked_conv2d(const Tensor<T>& x, const std::vector<Tensor<T>>& kernels,
                        const std::vector<int>& region_ids,
                        const std::vector<int>& labels, const Tensor<T>& bias) {
  RGI_CHECK(!kernels.empty() && kernels.size() == region_ids.size(),
            "masked_conv2d: one kernel per region id");
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  RGI_CHECK(static_cast<int>(labels.size()) == h * w,
            "masked_conv2d: label map must match spatial size");
  const int co = kernels[0].dim(0), kh = kernels[0].dim(2), kw = kernels[0].dim(3);
  const int pad = kh / 2;
  const int P = h * w, K = ci * kh * kw;
  const bool has_b = bias.defined();

  std::vector<typename Tensor<T>::NodePtr> parents{x.node()};
  for (auto& k : kernels) {
    RGI_CHECK(k.dim(0) == co && k.dim(1) == ci && k.dim(2) == kh && k.dim(3) == kw,
              "masked_conv2d: kernel shape mismatch");
    parents.push_back(k.node());
  }
  if (has_b) parents.push_back(bias.node());
  auto n = make_op_node<T>({co, h, w}, std::move(parents));

  // pixel index lists per active region
  std::vector<std::vector<int>> pix(kernels.size());
  {
    std::vector<int> slot(256, -1);
    for (size_t r = 0; r < region_ids.size(); ++r) slot[region_ids[r]] = static_cast<int>(r);
    for (int p = 0; p < P; ++p) {
      const int s = slot[labels[p]];
      if (s >= 0) pix[s].push_back(p);
    }
  }

  std::vector<T> cols(static_cast<size_t>(P) * K);
  detail::im2col(x.data(), ci, h, w, kh, kw, 1, pad, h, w, cols.data());
  for (size_t r = 0; r < kernels.size(); ++r) {
    const int pr = static_cast<int>(pix[r].size());
    if (pr == 0) continue;
    MatRM<T> sub(pr, K);
    for (int i = 0; i < pr; ++i)
      std::copy(cols.begin() + static_cast<size_t>(pix[r][i]) * K,
                cols.begin() + static_cast<size_t>(pix[r][i] + 1) * K,
                sub.data() + static_cast<size_t>(i) * K);
    MapCM<T> W(kernels[r].data(), co, K);
    MatRM<T> Yt = sub * W.transpose();  // [pr, co]
    for (int c = 0; c < co; ++c) {
      T* out = n->value.data() + c * P;
      for (int i = 0; i < pr; ++i) out[pix[r][i]] = Yt(i, c);
    }
  }
  if (has_b) {
    for (int c = 0; c < co; ++c) {
      T* out = n->value.data() + c * P;
      const T b = bias.data()[c];
      for (int p = 0; p < P; ++p) out[p] += b;
    }
  }

  if (n->requires_grad) {
    const size_t nk = kernels.size();
    n->backward_fn = [ci, h, w, co, kh, kw, pad, has_b, nk, pix](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      const int P2 = h * w, K2 = ci * kh * kw;
      auto& px = *nd.parents[0];
      std::vector<T> cols2(static_cast<size_t>(P2) * K2);
      detail::im2col(px.value.data(), ci, h, w, kh, kw, 1, pad, h, w, cols2.data());
      std::vector<T> gcols(static_cast<size_t>(P2) * K2, T(0));
      for (size_t r = 0; r < nk; ++r) {
        auto& pk = *nd.parents[1 + r];
        const int pr = static_cast<int>(pix[r].size());
        if (pr == 0) continue;
        MatRM<T> sub(pr, K2), Gt(pr, co);
        for (int i = 0; i < pr; ++i) {
          std::copy(cols2.begin() + static_cast<size_t>(pix[r][i]) * K2,
                    cols2.begin() + static_cast<size_t>(pix[r][i] + 1) * K2,
                    sub.data() + static_cast<size_t>(i) * K2);
          for (int c = 0; c < co; ++c) Gt(i, c) = nd.grad[c * P2 + pix[r][i]];
        }
        if (pk.requires_grad) {
          MapM<T> GW(pk.grad.data(), co, K2);
          GW.noalias() += Gt.transpose() * sub;
        }
        if (px.requires_grad) {
          MapCM<T> W2(pk.value.data(), co, K2);
          MatRM<T> gsub = Gt * W2;  // [pr, K]
          for (int i = 0; i < pr; ++i) {
            T* dst = gcols.data() + static_cast<size_t>(pix[r][i]) * K2;
            const T* src = gsub.data() + static_cast<size_t>(i) * K2;
            for (int k = 0; k < K2; ++k) dst[k] += src[k];
          }
        }
      }
      if (px.requires_grad)
        detail::col2im_accum(gcols.data(), ci, h, w, kh, kw, 1, pad, h, w,
                             px.grad.data());
      if (has_b && nd.parents[1 + nk]->requires_grad) {
        auto& pb = *nd.parents[1 + nk];
        for (int c = 0; c < co; ++c) {
          T s = T(0);
          for (int p = 0; p < P2; ++p) s += nd.grad[c * P2 + p];
          pb.grad[c] += s;
        }
      }
    };
  }
  return Tensor<T>(n);
}

// StyleGAN-style weight modulation: scale input channels, then optionally
// normalize each output filter to unit L2 norm.
template <typename T>
Tensor<T> modulate(const Tensor<T>& w, const Tensor<T>& scales, bool demod,
                   T eps = T(1e-8)) {
  RGI_CHECK(w.ndim() == 4 && scales.ndim() == 1 && scales.dim(0) == w.dim(1),
            "modulate: scales must match input channels");
  const int co = w.dim(0), ci = w.dim(1), kk = w.dim(2) * w.dim(3);
  auto n = make_op_node<T>(w.shape(), {w.node(), scales.node()});
  std::vector<T> dcoef(demod ? co : 0);
  for (int o = 0; o < co; ++o) {
    T ssum = T(0);
    for (int i = 0; i < ci; ++i) {
      const T s = scales.data()[i];
      for (int k = 0; k < kk; ++k) {
        const T v = w.data()[(o * ci + i) * kk + k] * s;
        n->value[(o * ci + i) * kk + k] = v;
        ssum += v * v;
      }
    }
    if (demod) {
      const T d = T(1) / std::sqrt(ssum + eps);
      dcoef[o] = d;
      for (int i = 0; i < ci * kk; ++i) n->value[o * ci * kk + i] *= d;
    }
  }
  if (n->requires_grad) {
    n->backward_fn = [co, ci, kk, demod, eps, dcoef](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& pw = *nd.parents[0];
      auto& ps = *nd.parents[1];
      for (int o = 0; o < co; ++o) {
        // reconstruct W1 = W*s and route grads
        const T d = demod ? dcoef[o] : T(1);
        T gd_dot = T(0);  // sum over (i,k) of g * W1  (for demod path)
        if (demod) {
          for (int i = 0; i < ci; ++i) {
            const T s = ps.value[i];
            for (int k = 0; k < kk; ++k) {
              const int idx = (o * ci + i) * kk + k;
              const T w1 = pw.value[idx] * s;
              gd_dot += nd.grad[idx] * w1;
            }
          }
        }
        for (int i = 0; i < ci; ++i) {
          const T s = ps.value[i];
          for (int k = 0; k < kk; ++k) {
            const int idx = (o * ci + i) * kk + k;
            const T w1 = pw.value[idx] * s;
            // d(out)/d(W1) = d * I - d^3 * W1 (x) W1   (demod), else I
            T g1 = nd.grad[idx] * d;
            if (demod) g1 -= d * d * d * gd_dot * w1;
            if (pw.requires_grad) pw.grad[idx] += g1 * s;
            if (ps.requires_grad) ps.grad[i] += g1 * pw.value[idx];
          }
        }
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> upsample_bilinear2x(const Tensor<T>& x) {
  RGI_CHECK(x.ndim() == 3, "upsample_bilinear2x: [C,H,W] required");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = 2 * h, wo = 2 * w;
  auto n = make_op_node<T>({c, ho, wo}, {x.node()});
  // precompute source taps (align_corners = false, edges clamped)
  std::vector<int> i0(ho), i1(ho);
  std::vector<T> fy(ho);
  for (int y = 0; y < ho; ++y) {
    const double sy = (y + 0.5) / 2.0 - 0.5;
    const double fl = std::floor(sy);
    int a = static_cast<int>(fl);
    double t = sy - fl;
    if (a < 0) { a = 0; t = 0.0; }
    int b = a + 1;
    if (b > h - 1) { b = h - 1; t = 0.0; }
    i0[y] = a; i1[y] = b; fy[y] = static_cast<T>(t);
  }
  std::vector<int> j0(wo), j1(wo);
  std::vector<T> fx(wo);
  for (int xx = 0; xx < wo; ++xx) {
    const double sx = (xx + 0.5) / 2.0 - 0.5;
    const double fl = std::floor(sx);
    int a = static_cast<int>(fl);
    double t = sx - fl;
    if (a < 0) { a = 0; t = 0.0; }
    int b = a + 1;
    if (b > w - 1) { b = w - 1; t = 0.0; }
    j0[xx] = a; j1[xx] = b; fx[xx] = static_cast<T>(t);
  }
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x.data() + ch * h * w;
    T* dst = n->value.data() + ch * ho * wo;
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) {
        const T a = src[i0[y] * w + j0[xx]], b = src[i0[y] * w + j1[xx]];
        const T cc = src[i1[y] * w + j0[xx]], dd = src[i1[y] * w + j1[xx]];
        const T top = a + fx[xx] * (b - a);
        const T bot = cc + fx[xx] * (dd - cc);
        dst[y * wo + xx] = top + fy[y] * (bot - top);
      }
  }
  if (n->requires_grad) {
    n->backward_fn = [c, h, w, ho, wo, i0, i1, fy, j0, j1, fx](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int ch = 0; ch < c; ++ch) {
        T* g = p.grad.data() + ch * h * w;
        const T* go = nd.grad.data() + ch * ho * wo;
        for (int y = 0; y < ho; ++y)
          for (int xx = 0; xx < wo; ++xx) {
            const T gv = go[y * wo + xx];
            const T wy1 = fy[y], wy0 = T(1) - wy1;
            const T wx1 = fx[xx], wx0 = T(1) - wx1;
            g[i0[y] * w + j0[xx]] += gv * wy0 * wx0;
            g[i0[y] * w + j1[xx]] += gv * wy0 * wx1;
            g[i1[y] * w + j0[xx]] += gv * wy1 * wx0;
            g[i1[y] * w + j1[xx]] += gv * wy1 * wx1;
          }
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> avgpool2x(const Tensor<T>& x) {
  RGI_CHECK(x.ndim() == 3 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0,
            "avgpool2x: even spatial dims required");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = h / 2, wo = w / 2;
  auto n = make_op_node<T>({c, ho, wo}, {x.node()});
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x.data() + ch * h * w;
    T* dst = n->value.data() + ch * ho * wo;
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx)
        dst[y * wo + xx] = (src[(2 * y) * w + 2 * xx] + src[(2 * y) * w + 2 * xx + 1] +
                            src[(2 * y + 1) * w + 2 * xx] +
                            src[(2 * y + 1) * w + 2 * xx + 1]) *
                           T(0.25);
  }
  if (n->requires_grad) {
    n->backward_fn = [c, h, w, ho, wo](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int ch = 0; ch < c; ++ch) {
        T* g = p.grad.data() + ch * h * w;
        const T* go = nd.grad.data() + ch * ho * wo;
        for (int y = 0; y < ho; ++y)
          for (int xx = 0; xx < wo; ++xx) {
            const T gv = go[y * wo + xx] * T(0.25);
            g[(2 * y) * w + 2 * xx] += gv;
            g[(2 * y) * w + 2 * xx + 1] += gv;
            g[(2 * y + 1) * w + 2 * xx] += gv;
            g[(2 * y + 1) * w + 2 * xx + 1] += gv;
          }
      }
    };
  }
  return Tensor<T>(n);
}

// repeated 2x average pooling down to size (power-of-two ratio)
template <typename T>
Tensor<T> downsample_to(const Tensor<T>& x, int size) {
  RGI_CHECK(x.dim(1) >= size && x.dim(1) % size == 0 && is_pow2(x.dim(1) / size),
            "downsample_to: power-of-two ratio required");
  Tensor<T> out = x;
  while (out.dim(1) > size) out = avgpool2x(out);
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  RGI_CHECK(x.ndim() == 3, "global_avg_pool: [C,H,W] required");
  const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
  auto n = make_op_node<T>({c}, {x.node()});
  for (int ch = 0; ch < c; ++ch) {
    T s = T(0);
    const T* src = x.data() + ch * hw;
    for (int i = 0; i < hw; ++i) s += src[i];
    n->value[ch] = s / static_cast<T>(hw);
  }
  if (n->requires_grad) {
    n->backward_fn = [c, hw](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      for (int ch = 0; ch < c; ++ch) {
        const T g = nd.grad[ch] / static_cast<T>(hw);
        for (int i = 0; i < hw; ++i) p.grad[ch * hw + i] += g;
      }
    };
  }
  return Tensor<T>(n);
}

// per-channel mean over a pixel subset; empty subset gives zeros
template <typename T>
Tensor<T> region_mean(const Tensor<T>& x, const std::vector<int>& pixels) {
  RGI_CHECK(x.ndim() == 3, "region_mean: [C,H,W] required");
  const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
  auto n = make_op_node<T>({c}, {x.node()});
  const int cnt = static_cast<int>(pixels.size());
  if (cnt > 0) {
    const T inv = T(1) / static_cast<T>(cnt);
    for (int ch = 0; ch < c; ++ch) {
      T s = T(0);
      const T* src = x.data() + ch * hw;
      for (int p : pixels) s += src[p];
      n->value[ch] = s * inv;
    }
  }
  if (n->requires_grad && cnt > 0) {
    n->backward_fn = [c, hw, pixels, cnt](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      const T inv = T(1) / static_cast<T>(cnt);
      for (int ch = 0; ch < c; ++ch) {
        const T g = nd.grad[ch] * inv;
        for (int px : pixels) p.grad[ch * hw + px] += g;
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b) {
  RGI_CHECK(x.ndim() == 3 && b.ndim() == 1 && b.dim(0) == x.dim(0),
            "add_channel_bias: shape mismatch");
  const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
  auto n = make_op_node<T>(x.shape(), {x.node(), b.node()});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < hw; ++i)
      n->value[ch * hw + i] = x.data()[ch * hw + i] + b.data()[ch];
  if (n->requires_grad) {
    n->backward_fn = [c, hw](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& px = *nd.parents[0];
      auto& pb = *nd.parents[1];
      for (int ch = 0; ch < c; ++ch) {
        T s = T(0);
        for (int i = 0; i < hw; ++i) {
          const T g = nd.grad[ch * hw + i];
          if (px.requires_grad) px.grad[ch * hw + i] += g;
          s += g;
        }
        if (pb.requires_grad) pb.grad[ch] += s;
      }
    };
  }
  return Tensor<T>(n);
}

// x + gain * noise; noise is fixed data, gain is a learned scalar
template <typename T>
Tensor<T> add_noise(const Tensor<T>& x, const std::vector<T>& noise,
                    const Tensor<T>& gain) {
  RGI_CHECK(static_cast<int>(noise.size()) == x.dim(1) * x.dim(2),
            "add_noise: noise plane must match spatial size");
  const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
  auto n = make_op_node<T>(x.shape(), {x.node(), gain.node()});
  const T g = gain.data()[0];
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < hw; ++i)
      n->value[ch * hw + i] = x.data()[ch * hw + i] + g * noise[i];
  if (n->requires_grad) {
    n->backward_fn = [c, hw, noise](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& px = *nd.parents[0];
      auto& pg = *nd.parents[1];
      T gsum = T(0);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i) {
          const T g = nd.grad[ch * hw + i];
          if (px.requires_grad) px.grad[ch * hw + i] += g;
          gsum += g * noise[i];
        }
      if (pg.requires_grad) pg.grad[0] += gsum;
    };
  }
  return Tensor<T>(n);
}

// multiply a tensor by a scalar tensor [1]
template <typename T>
Tensor<T> scale_by(const Tensor<T>& x, const Tensor<T>& s) {
  RGI_CHECK(s.numel() == 1, "scale_by: scalar tensor required");
  auto n = make_op_node<T>(x.shape(), {x.node(), s.node()});
  const T sv = s.data()[0];
  for (int i = 0; i < n->numel(); ++i) n->value[i] = x.data()[i] * sv;
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& px = *nd.parents[0];
      auto& ps = *nd.parents[1];
      const T sv = ps.value[0];
      T acc = T(0);
      for (size_t i = 0; i < px.value.size(); ++i) {
        if (px.requires_grad) px.grad[i] += nd.grad[i] * sv;
        acc += nd.grad[i] * px.value[i];
      }
      if (ps.requires_grad) ps.grad[0] += acc;
    };
  }
  return Tensor<T>(n);
}

// Scatter row blocks [N_r, C] into a [C, H, W] map at given pixel indices;
// unwritten pixels stay zero. Parts must not overlap.
template <typename T>
Tensor<T> scatter_rows_chw(
    const std::vector<std::pair<Tensor<T>, std::vector<int>>>& parts, int channels,
    int h, int w) {
  std::vector<typename Tensor<T>::NodePtr> parents;
  for (const auto& [rows, idx] : parts) {
    RGI_CHECK(rows.ndim() == 2 && rows.dim(1) == channels &&
                  rows.dim(0) == static_cast<int>(idx.size()),
              "scatter_rows_chw: rows must be [N, channels]");
    parents.push_back(rows.node());
  }
  auto n = make_op_node<T>({channels, h, w}, std::move(parents));
  const int hw = h * w;
  for (const auto& [rows, idx] : parts)
    for (size_t i = 0; i < idx.size(); ++i)
      for (int c = 0; c < channels; ++c)
        n->value[c * hw + idx[i]] = rows.data()[i * channels + c];
  if (n->requires_grad) {
    std::vector<std::vector<int>> idxs;
    for (const auto& p : parts) idxs.push_back(p.second);
    n->backward_fn = [idxs, channels, hw](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      for (size_t k = 0; k < idxs.size(); ++k) {
        auto& p = *nd.parents[k];
        if (!p.requires_grad) continue;
        for (size_t i = 0; i < idxs[k].size(); ++i)
          for (int c = 0; c < channels; ++c)
            p.grad[i * channels + c] += nd.grad[c * hw + idxs[k][i]];
      }
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// composed helpers
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
  return mean_all(square(sub(a, b)));
}

template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b,
                            T eps = T(1e-8)) {
  auto af = reshape(a, {a.numel()});
  auto bf = reshape(b, {b.numel()});
  auto dot = sum_all(mul(af, bf));
  auto na = sqrt_t(add_scalar(sum_all(square(af)), eps));
  auto nb = sqrt_t(add_scalar(sum_all(square(bf)), eps));
  return div(dot, mul(na, nb));
}

template <typename T>
Tensor<T> softplus_mean(const Tensor<T>& x) {
  auto n = make_op_node<T>({1}, {x.node()});
  T s = T(0);
  for (int i = 0; i < x.numel(); ++i) {
    const T v = x.data()[i];
    // numerically stable log(1+exp(v))
    s += v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  n->value[0] = s / static_cast<T>(x.numel());
  if (n->requires_grad) {
    n->backward_fn = [](TensorNode<T>& nd) {
      detail::ensure_parent_grads(nd);
      auto& p = *nd.parents[0];
      const T inv = T(1) / static_cast<T>(p.value.size());
      for (size_t i = 0; i < p.value.size(); ++i) {
        const T sig = T(1) / (T(1) + std::exp(-p.value[i]));
        p.grad[i] += nd.grad[0] * sig * inv;
      }
    };
  }
  return Tensor<T>(n);
}

}  // namespace rgi
