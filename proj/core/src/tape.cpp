#include "hiore/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace hiore {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

template <typename T>
inline T gelu_fwd(T x) {
  return static_cast<T>(0.5) * x * (static_cast<T>(1) + static_cast<T>(std::erf(static_cast<double>(x) * kInvSqrt2)));
}

template <typename T>
inline T gelu_bwd(T x) {
  double xd = static_cast<double>(x);
  double phi = std::exp(-0.5 * xd * xd) * kInvSqrt2Pi;
  double Phi = 0.5 * (1.0 + std::erf(xd * kInvSqrt2));
  return static_cast<T>(Phi + xd * phi);
}

}  // namespace

template <typename T>
void Tape<T>::shape_fail(const char* op, const std::string& detail) const {
  throw ShapeError(std::string(op) + ": " + detail);
}

template <typename T>
typename Tape<T>::Id Tape<T>::push(Tensor<T> value, bool requires_grad, const char* op) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.op = op;
  nodes_.push_back(std::move(n));
  Id id = static_cast<Id>(nodes_.size() - 1);
  check_value(id);
  return id;
}

template <typename T>
void Tape<T>::check_value(Id id) {
  if (!check_finite_) return;
  const Node& n = nodes_[static_cast<size_t>(id)];
  for (T v : n.value.data) {
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError(std::string("non-finite value produced by op '") + n.op + "'");
  }
}

template <typename T>
Tensor<T>* Tape<T>::grad_ptr(Id id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.requires_grad) return nullptr;
  return &n.grad;
}

template <typename T>
typename Tape<T>::Id Tape<T>::constant(Tensor<T> v) {
  return push(std::move(v), false, "constant");
}

template <typename T>
typename Tape<T>::Id Tape<T>::input(Tensor<T> v, bool requires_grad) {
  return push(std::move(v), requires_grad, "input");
}

template <typename T>
typename Tape<T>::Id Tape<T>::param(Parameter<T>& p) {
  Id id = push(p.value, record_grads_ && p.trainable, "param");
  nodes_[static_cast<size_t>(id)].bound = &p;
  return id;
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T>
typename Tape<T>::Id Tape<T>::add(Id a, Id b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (!av.same_shape(bv)) shape_fail("add", shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] + bv.data[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Id id = push(std::move(out), rg, "add");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, a, b, id]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* ga = grad_ptr(a))
        for (int64_t i = 0; i < g.numel(); ++i) ga->data[i] += g.data[i];
      if (Tensor<T>* gb = grad_ptr(b))
        for (int64_t i = 0; i < g.numel(); ++i) gb->data[i] += g.data[i];
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::sub(Id a, Id b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (!av.same_shape(bv)) shape_fail("sub", shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] - bv.data[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Id id = push(std::move(out), rg, "sub");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, a, b, id]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* ga = grad_ptr(a))
        for (int64_t i = 0; i < g.numel(); ++i) ga->data[i] += g.data[i];
      if (Tensor<T>* gb = grad_ptr(b))
        for (int64_t i = 0; i < g.numel(); ++i) gb->data[i] -= g.data[i];
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::mul(Id a, Id b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (!av.same_shape(bv)) shape_fail("mul", shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] * bv.data[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Id id = push(std::move(out), rg, "mul");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, a, b, id]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& av2 = value(a);
      const Tensor<T>& bv2 = value(b);
      if (Tensor<T>* ga = grad_ptr(a))
        for (int64_t i = 0; i < g.numel(); ++i) ga->data[i] += g.data[i] * bv2.data[i];
      if (Tensor<T>* gb = grad_ptr(b))
        for (int64_t i = 0; i < g.numel(); ++i) gb->data[i] += g.data[i] * av2.data[i];
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::scale(Id a, T s) {
  const Tensor<T>& av = value(a);
  Tensor<T> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] * s;
  bool rg = requires_grad(a);
  Id id = push(std::move(out), rg, "scale");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, a, s, id]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* ga = grad_ptr(a))
        for (int64_t i = 0; i < g.numel(); ++i) ga->data[i] += g.data[i] * s;
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::gelu(Id x) {
  const Tensor<T>& xv = value(x);
  Tensor<T> out(xv.shape);
  for (int64_t i = 0; i < xv.numel(); ++i) out.data[i] = gelu_fwd(xv.data[i]);
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "gelu");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& xv2 = value(x);
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < g.numel(); ++i) gx->data[i] += g.data[i] * gelu_bwd(xv2.data[i]);
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::sum(Id x) {
  const Tensor<T>& xv = value(x);
  T acc = T(0);
  for (T v : xv.data) acc += v;
  Tensor<T> out(Shape{1});
  out.data[0] = acc;
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "sum");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id]() {
      T g = nodes_[static_cast<size_t>(id)].grad.data[0];
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < gx->numel(); ++i) gx->data[i] += g;
    };
  }
  return id;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
typename Tape<T>::Id Tape<T>::matmul(Id a, Id b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    shape_fail("matmul", shape_str(av.shape) + " x " + shape_str(bv.shape));
  int64_t r = av.dim(0), k = av.dim(1), c = bv.dim(1);
  Tensor<T> out(Shape{r, c});
  for (int64_t i = 0; i < r; ++i) {
    T* orow = &out.data[static_cast<size_t>(i * c)];
    for (int64_t kk = 0; kk < k; ++kk) {
      T aik = av(i, kk);
      const T* brow = &bv.data[static_cast<size_t>(kk * c)];
      for (int64_t j = 0; j < c; ++j) orow[j] += aik * brow[j];
    }
  }
  bool rg = requires_grad(a) || requires_grad(b);
  Id id = push(std::move(out), rg, "matmul");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, a, b, id, r, k, c]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& av2 = value(a);
      const Tensor<T>& bv2 = value(b);
      if (Tensor<T>* ga = grad_ptr(a)) {
        // dA = dC * B^T
        for (int64_t i = 0; i < r; ++i)
          for (int64_t kk = 0; kk < k; ++kk) {
            T acc = T(0);
            const T* grow = &g.data[static_cast<size_t>(i * c)];
            const T* brow = &bv2.data[static_cast<size_t>(kk * c)];
            for (int64_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
            ga->data[static_cast<size_t>(i * k + kk)] += acc;
          }
      }
      if (Tensor<T>* gb = grad_ptr(b)) {
        // dB = A^T * dC
        for (int64_t kk = 0; kk < k; ++kk)
          for (int64_t i = 0; i < r; ++i) {
            T aik = av2(i, kk);
            T* brow = &gb->data[static_cast<size_t>(kk * c)];
            const T* grow = &g.data[static_cast<size_t>(i * c)];
            for (int64_t j = 0; j < c; ++j) brow[j] += aik * grow[j];
          }
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::transpose(Id a) {
  const Tensor<T>& av = value(a);
  if (av.rank() != 2) shape_fail("transpose", "expected 2D, got " + shape_str(av.shape));
  int64_t r = av.dim(0), c = av.dim(1);
  Tensor<T> out(Shape{c, r});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out(j, i) = av(i, j);
  bool rg = requires_grad(a);
  Id id = push(std::move(out), rg, "transpose");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, a, id, r, c]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* ga = grad_ptr(a))
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < c; ++j) ga->data[static_cast<size_t>(i * c + j)] += g(j, i);
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::linear(Id x, Id w, Id b) {
  const Tensor<T>& xv = value(x);
  const Tensor<T>& wv = value(w);
  const Tensor<T>& bv = value(b);
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.dim(1) != wv.dim(0) ||
      wv.dim(1) != bv.dim(0))
    shape_fail("linear", shape_str(xv.shape) + " x " + shape_str(wv.shape) + " + " + shape_str(bv.shape));
  int64_t r = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(1);
  Tensor<T> out(Shape{r, out_dim});
  for (int64_t i = 0; i < r; ++i) {
    T* orow = &out.data[static_cast<size_t>(i * out_dim)];
    for (int64_t j = 0; j < out_dim; ++j) orow[j] = bv.data[static_cast<size_t>(j)];
    for (int64_t kk = 0; kk < in; ++kk) {
      T xik = xv(i, kk);
      const T* wrow = &wv.data[static_cast<size_t>(kk * out_dim)];
      for (int64_t j = 0; j < out_dim; ++j) orow[j] += xik * wrow[j];
    }
  }
  bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
  Id id = push(std::move(out), rg, "linear");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, w, b, id, r, in, out_dim]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& xv2 = value(x);
      const Tensor<T>& wv2 = value(w);
      if (Tensor<T>* gx = grad_ptr(x)) {
        for (int64_t i = 0; i < r; ++i)
          for (int64_t kk = 0; kk < in; ++kk) {
            T acc = T(0);
            const T* grow = &g.data[static_cast<size_t>(i * out_dim)];
            const T* wrow = &wv2.data[static_cast<size_t>(kk * out_dim)];
            for (int64_t j = 0; j < out_dim; ++j) acc += grow[j] * wrow[j];
            gx->data[static_cast<size_t>(i * in + kk)] += acc;
          }
      }
      if (Tensor<T>* gw = grad_ptr(w)) {
        for (int64_t i = 0; i < r; ++i)
          for (int64_t kk = 0; kk < in; ++kk) {
            T xik = xv2(i, kk);
            T* wrow = &gw->data[static_cast<size_t>(kk * out_dim)];
            const T* grow = &g.data[static_cast<size_t>(i * out_dim)];
            for (int64_t j = 0; j < out_dim; ++j) wrow[j] += xik * grow[j];
          }
      }
      if (Tensor<T>* gb = grad_ptr(b)) {
        for (int64_t i = 0; i < r; ++i) {
          const T* grow = &g.data[static_cast<size_t>(i * out_dim)];
          for (int64_t j = 0; j < out_dim; ++j) gb->data[static_cast<size_t>(j)] += grow[j];
        }
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::softmax(Id x, int axis) {
  const Tensor<T>& xv = value(x);
  if (axis < 0 || axis >= xv.rank()) shape_fail("softmax", "axis out of range");
  int64_t k = xv.dim(axis);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (int i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  Tensor<T> out(xv.shape);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const T* src = &xv.data[static_cast<size_t>(o * k * inner + in)];
      T* dst = &out.data[static_cast<size_t>(o * k * inner + in)];
      T mx = src[0];
      for (int64_t c = 1; c < k; ++c) mx = std::max(mx, src[c * inner]);
      T denom = T(0);
      for (int64_t c = 0; c < k; ++c) {
        T e = static_cast<T>(std::exp(static_cast<double>(src[c * inner] - mx)));
        dst[c * inner] = e;
        denom += e;
      }
      for (int64_t c = 0; c < k; ++c) dst[c * inner] /= denom;
    }
  }
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "softmax");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id, k, outer, inner]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& y = value(id);
      if (Tensor<T>* gx = grad_ptr(x)) {
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t in = 0; in < inner; ++in) {
            size_t base = static_cast<size_t>(o * k * inner + in);
            T dot = T(0);
            for (int64_t c = 0; c < k; ++c)
              dot += g.data[base + static_cast<size_t>(c * inner)] * y.data[base + static_cast<size_t>(c * inner)];
            for (int64_t c = 0; c < k; ++c) {
              size_t at = base + static_cast<size_t>(c * inner);
              gx->data[at] += y.data[at] * (g.data[at] - dot);
            }
          }
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::layer_norm(Id x, Id gamma, Id beta, T eps) {
  const Tensor<T>& xv = value(x);
  const Tensor<T>& gv = value(gamma);
  const Tensor<T>& bv = value(beta);
  int64_t k = xv.dim(xv.rank() - 1);
  if (gv.numel() != k || bv.numel() != k) shape_fail("layer_norm", "gamma/beta dim mismatch");
  int64_t rows = xv.numel() / k;
  Tensor<T> out(xv.shape);
  auto cache = std::make_shared<std::vector<T>>(static_cast<size_t>(rows * 2));  // mean, rstd per row
  for (int64_t r = 0; r < rows; ++r) {
    const T* src = &xv.data[static_cast<size_t>(r * k)];
    T* dst = &out.data[static_cast<size_t>(r * k)];
    T mean = T(0);
    for (int64_t c = 0; c < k; ++c) mean += src[c];
    mean /= static_cast<T>(k);
    T var = T(0);
    for (int64_t c = 0; c < k; ++c) {
      T d = src[c] - mean;
      var += d * d;
    }
    var /= static_cast<T>(k);
    T rstd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var + eps)));
    (*cache)[static_cast<size_t>(2 * r)] = mean;
    (*cache)[static_cast<size_t>(2 * r + 1)] = rstd;
    for (int64_t c = 0; c < k; ++c)
      dst[c] = (src[c] - mean) * rstd * gv.data[static_cast<size_t>(c)] + bv.data[static_cast<size_t>(c)];
  }
  bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  Id id = push(std::move(out), rg, "layer_norm");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, gamma, beta, id, rows, k, cache]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& xv2 = value(x);
      const Tensor<T>& gv2 = value(gamma);
      Tensor<T>* gx = grad_ptr(x);
      Tensor<T>* gg = grad_ptr(gamma);
      Tensor<T>* gb = grad_ptr(beta);
      for (int64_t r = 0; r < rows; ++r) {
        const T* src = &xv2.data[static_cast<size_t>(r * k)];
        const T* grow = &g.data[static_cast<size_t>(r * k)];
        T mean = (*cache)[static_cast<size_t>(2 * r)];
        T rstd = (*cache)[static_cast<size_t>(2 * r + 1)];
        // xhat = (x - mean) * rstd; dy_g = dy * gamma
        T sum_dyg = T(0), sum_dyg_xhat = T(0);
        for (int64_t c = 0; c < k; ++c) {
          T xhat = (src[c] - mean) * rstd;
          T dyg = grow[c] * gv2.data[static_cast<size_t>(c)];
          sum_dyg += dyg;
          sum_dyg_xhat += dyg * xhat;
          if (gg) gg->data[static_cast<size_t>(c)] += grow[c] * xhat;
          if (gb) gb->data[static_cast<size_t>(c)] += grow[c];
        }
        if (gx) {
          T invk = static_cast<T>(1) / static_cast<T>(k);
          T* gxrow = &gx->data[static_cast<size_t>(r * k)];
          for (int64_t c = 0; c < k; ++c) {
            T xhat = (src[c] - mean) * rstd;
            T dyg = grow[c] * gv2.data[static_cast<size_t>(c)];
            gxrow[c] += rstd * (dyg - invk * sum_dyg - xhat * invk * sum_dyg_xhat);
          }
        }
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::dropout(Id x, T rate, uint64_t seed) {
  if (rate <= T(0)) return x;
  if (rate >= T(1)) shape_fail("dropout", "rate must be < 1");
  const Tensor<T>& xv = value(x);
  auto mask = std::make_shared<std::vector<T>>(static_cast<size_t>(xv.numel()));
  Rng rng(seed);
  T keep = T(1) - rate;
  T inv_keep = T(1) / keep;
  Tensor<T> out(xv.shape);
  for (int64_t i = 0; i < xv.numel(); ++i) {
    T m = rng.uniform() < static_cast<double>(keep) ? inv_keep : T(0);
    (*mask)[static_cast<size_t>(i)] = m;
    out.data[i] = xv.data[i] * m;
  }
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "dropout");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id, mask]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < g.numel(); ++i) gx->data[i] += g.data[i] * (*mask)[static_cast<size_t>(i)];
    };
  }
  return id;
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

template <typename T>
typename Tape<T>::Id Tape<T>::reshape(Id x, Shape shape) {
  const Tensor<T>& xv = value(x);
  if (shape_numel(shape) != xv.numel())
    shape_fail("reshape", shape_str(xv.shape) + " -> " + shape_str(shape));
  Tensor<T> out = Tensor<T>::from(shape, xv.data);
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "reshape");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < g.numel(); ++i) gx->data[i] += g.data[i];
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::concat(const std::vector<Id>& xs, int axis) {
  if (xs.empty()) shape_fail("concat", "no inputs");
  const Tensor<T>& first = value(xs[0]);
  int rank = first.rank();
  if (axis < 0 || axis >= rank) shape_fail("concat", "axis out of range");
  Shape out_shape = first.shape;
  int64_t total_axis = 0;
  for (Id x : xs) {
    const Tensor<T>& v = value(x);
    if (v.rank() != rank) shape_fail("concat", "rank mismatch");
    for (int i = 0; i < rank; ++i)
      if (i != axis && v.dim(i) != first.dim(i)) shape_fail("concat", "dim mismatch off-axis");
    total_axis += v.dim(axis);
  }
  out_shape[static_cast<size_t>(axis)] = total_axis;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= first.dim(i);
  for (int i = axis + 1; i < rank; ++i) inner *= first.dim(i);
  Tensor<T> out(out_shape);
  int64_t axis_off = 0;
  for (Id x : xs) {
    const Tensor<T>& v = value(x);
    int64_t cdim = v.dim(axis);
    for (int64_t o = 0; o < outer; ++o) {
      const T* src = &v.data[static_cast<size_t>(o * cdim * inner)];
      T* dst = &out.data[static_cast<size_t>((o * total_axis + axis_off) * inner)];
      std::copy(src, src + cdim * inner, dst);
    }
    axis_off += cdim;
  }
  bool rg = false;
  for (Id x : xs) rg = rg || requires_grad(x);
  Id id = push(std::move(out), rg, "concat");
  if (rg) {
    std::vector<Id> xs_copy = xs;
    nodes_[static_cast<size_t>(id)].backprop = [this, xs_copy, id, outer, inner, total_axis, axis]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      int64_t axis_off2 = 0;
      for (Id x : xs_copy) {
        int64_t cdim = value(x).dim(axis);
        if (Tensor<T>* gx = grad_ptr(x)) {
          for (int64_t o = 0; o < outer; ++o) {
            const T* src = &g.data[static_cast<size_t>((o * total_axis + axis_off2) * inner)];
            T* dst = &gx->data[static_cast<size_t>(o * cdim * inner)];
            for (int64_t i = 0; i < cdim * inner; ++i) dst[i] += src[i];
          }
        }
        axis_off2 += cdim;
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::stack_last(const std::vector<Id>& xs) {
  if (xs.empty()) shape_fail("stack_last", "no inputs");
  const Tensor<T>& first = value(xs[0]);
  int64_t k = static_cast<int64_t>(xs.size());
  for (Id x : xs)
    if (!value(x).same_shape(first)) shape_fail("stack_last", "shape mismatch");
  Shape out_shape = first.shape;
  out_shape.push_back(k);
  int64_t elems = first.numel();
  Tensor<T> out(out_shape);
  for (int64_t c = 0; c < k; ++c) {
    const Tensor<T>& v = value(xs[static_cast<size_t>(c)]);
    for (int64_t e = 0; e < elems; ++e) out.data[static_cast<size_t>(e * k + c)] = v.data[static_cast<size_t>(e)];
  }
  bool rg = false;
  for (Id x : xs) rg = rg || requires_grad(x);
  Id id = push(std::move(out), rg, "stack_last");
  if (rg) {
    std::vector<Id> xs_copy = xs;
    nodes_[static_cast<size_t>(id)].backprop = [this, xs_copy, id, k, elems]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      for (int64_t c = 0; c < k; ++c) {
        if (Tensor<T>* gx = grad_ptr(xs_copy[static_cast<size_t>(c)]))
          for (int64_t e = 0; e < elems; ++e) gx->data[static_cast<size_t>(e)] += g.data[static_cast<size_t>(e * k + c)];
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::slice_cols(Id x, int64_t from, int64_t to) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 2 || from < 0 || to > xv.dim(1) || from >= to)
    shape_fail("slice_cols", "bad range on " + shape_str(xv.shape));
  int64_t r = xv.dim(0), c = xv.dim(1), w = to - from;
  Tensor<T> out(Shape{r, w});
  for (int64_t i = 0; i < r; ++i)
    std::copy(&xv.data[static_cast<size_t>(i * c + from)], &xv.data[static_cast<size_t>(i * c + to)],
              &out.data[static_cast<size_t>(i * w)]);
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "slice_cols");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id, r, c, w, from]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < w; ++j)
            gx->data[static_cast<size_t>(i * c + from + j)] += g.data[static_cast<size_t>(i * w + j)];
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::pad2d(Id x, int64_t rows, int64_t cols) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 3 || rows < xv.dim(0) || cols < xv.dim(1))
    shape_fail("pad2d", shape_str(xv.shape) + " -> " + std::to_string(rows) + "x" + std::to_string(cols));
  int64_t h = xv.dim(0), w = xv.dim(1), ch = xv.dim(2);
  Tensor<T> out(Shape{rows, cols, ch});
  for (int64_t i = 0; i < h; ++i)
    std::copy(&xv.data[static_cast<size_t>(i * w * ch)], &xv.data[static_cast<size_t>((i + 1) * w * ch)],
              &out.data[static_cast<size_t>(i * cols * ch)]);
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "pad2d");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id, h, w, ch, cols]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < w * ch; ++j)
            gx->data[static_cast<size_t>(i * w * ch + j)] += g.data[static_cast<size_t>(i * cols * ch + j)];
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::crop2d(Id x, int64_t rows, int64_t cols) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 3 || rows > xv.dim(0) || cols > xv.dim(1))
    shape_fail("crop2d", shape_str(xv.shape) + " -> " + std::to_string(rows) + "x" + std::to_string(cols));
  int64_t w = xv.dim(1), ch = xv.dim(2);
  Tensor<T> out(Shape{rows, cols, ch});
  for (int64_t i = 0; i < rows; ++i)
    std::copy(&xv.data[static_cast<size_t>(i * w * ch)], &xv.data[static_cast<size_t>(i * w * ch + cols * ch)],
              &out.data[static_cast<size_t>(i * cols * ch)]);
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "crop2d");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id, rows, cols, w, ch]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < rows; ++i)
          for (int64_t j = 0; j < cols * ch; ++j)
            gx->data[static_cast<size_t>(i * w * ch + j)] += g.data[static_cast<size_t>(i * cols * ch + j)];
    };
  }
  return id;
}

// ---------------------------------------------------------------------------
// Conv stack
// ---------------------------------------------------------------------------

template <typename T>
typename Tape<T>::Id Tape<T>::conv2d_3x3(Id x, Id w, Id b) {
  const Tensor<T>& xv = value(x);
  const Tensor<T>& wv = value(w);
  const Tensor<T>& bv = value(b);
  if (xv.rank() != 3 || wv.rank() != 4 || wv.dim(0) != 3 || wv.dim(1) != 3 || wv.dim(2) != xv.dim(2) ||
      bv.numel() != wv.dim(3))
    shape_fail("conv2d_3x3", shape_str(xv.shape) + " * " + shape_str(wv.shape));
  int64_t h = xv.dim(0), wd = xv.dim(1), ci = xv.dim(2), co = wv.dim(3);
  Tensor<T> out(Shape{h, wd, co});
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < wd; ++j) {
      T* orow = &out.data[static_cast<size_t>((i * wd + j) * co)];
      for (int64_t c = 0; c < co; ++c) orow[c] = bv.data[static_cast<size_t>(c)];
      for (int64_t di = -1; di <= 1; ++di) {
        int64_t ii = i + di;
        if (ii < 0 || ii >= h) continue;
        for (int64_t dj = -1; dj <= 1; ++dj) {
          int64_t jj = j + dj;
          if (jj < 0 || jj >= wd) continue;
          const T* xrow = &xv.data[static_cast<size_t>((ii * wd + jj) * ci)];
          const T* wbase = &wv.data[static_cast<size_t>((((di + 1) * 3) + (dj + 1)) * ci * co)];
          for (int64_t c = 0; c < ci; ++c) {
            T xval = xrow[c];
            const T* wrow = wbase + c * co;
            for (int64_t oc = 0; oc < co; ++oc) orow[oc] += xval * wrow[oc];
          }
        }
      }
    }
  }
  bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
  Id id = push(std::move(out), rg, "conv2d_3x3");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, w, b, id, h, wd, ci, co]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& xv2 = value(x);
      const Tensor<T>& wv2 = value(w);
      Tensor<T>* gx = grad_ptr(x);
      Tensor<T>* gw = grad_ptr(w);
      Tensor<T>* gb = grad_ptr(b);
      if (gb) {
        for (int64_t i = 0; i < h * wd; ++i) {
          const T* grow = &g.data[static_cast<size_t>(i * co)];
          for (int64_t oc = 0; oc < co; ++oc) gb->data[static_cast<size_t>(oc)] += grow[oc];
        }
      }
      for (int64_t i = 0; i < h; ++i) {
        for (int64_t j = 0; j < wd; ++j) {
          const T* grow = &g.data[static_cast<size_t>((i * wd + j) * co)];
          for (int64_t di = -1; di <= 1; ++di) {
            int64_t ii = i + di;
            if (ii < 0 || ii >= h) continue;
            for (int64_t dj = -1; dj <= 1; ++dj) {
              int64_t jj = j + dj;
              if (jj < 0 || jj >= wd) continue;
              size_t woff = static_cast<size_t>((((di + 1) * 3) + (dj + 1)) * ci * co);
              const T* xrow = &xv2.data[static_cast<size_t>((ii * wd + jj) * ci)];
              if (gx) {
                T* gxrow = &gx->data[static_cast<size_t>((ii * wd + jj) * ci)];
                const T* wbase = &wv2.data[woff];
                for (int64_t c = 0; c < ci; ++c) {
                  T acc = T(0);
                  const T* wrow = wbase + c * co;
                  for (int64_t oc = 0; oc < co; ++oc) acc += grow[oc] * wrow[oc];
                  gxrow[c] += acc;
                }
              }
              if (gw) {
                T* gwbase = &gw->data[woff];
                for (int64_t c = 0; c < ci; ++c) {
                  T xval = xrow[c];
                  T* gwrow = gwbase + c * co;
                  for (int64_t oc = 0; oc < co; ++oc) gwrow[oc] += xval * grow[oc];
                }
              }
            }
          }
        }
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::maxpool_2x2(Id x) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 3 || xv.dim(0) % 2 != 0 || xv.dim(1) % 2 != 0)
    shape_fail("maxpool_2x2", "needs even HxW, got " + shape_str(xv.shape));
  int64_t h = xv.dim(0), w = xv.dim(1), ch = xv.dim(2);
  int64_t oh = h / 2, ow = w / 2;
  Tensor<T> out(Shape{oh, ow, ch});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(oh * ow * ch));
  for (int64_t i = 0; i < oh; ++i) {
    for (int64_t j = 0; j < ow; ++j) {
      for (int64_t c = 0; c < ch; ++c) {
        int64_t best_idx = ((2 * i) * w + 2 * j) * ch + c;
        T best = xv.data[static_cast<size_t>(best_idx)];
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            int64_t idx = ((2 * i + di) * w + (2 * j + dj)) * ch + c;
            if (xv.data[static_cast<size_t>(idx)] > best) {
              best = xv.data[static_cast<size_t>(idx)];
              best_idx = idx;
            }
          }
        out.data[static_cast<size_t>((i * ow + j) * ch + c)] = best;
        (*argmax)[static_cast<size_t>((i * ow + j) * ch + c)] = best_idx;
      }
    }
  }
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "maxpool_2x2");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id, argmax]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < g.numel(); ++i)
          gx->data[static_cast<size_t>((*argmax)[static_cast<size_t>(i)])] += g.data[static_cast<size_t>(i)];
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::upsample_nearest_2x(Id x) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 3) shape_fail("upsample_nearest_2x", shape_str(xv.shape));
  int64_t h = xv.dim(0), w = xv.dim(1), ch = xv.dim(2);
  Tensor<T> out(Shape{2 * h, 2 * w, ch});
  for (int64_t i = 0; i < 2 * h; ++i)
    for (int64_t j = 0; j < 2 * w; ++j) {
      const T* src = &xv.data[static_cast<size_t>(((i / 2) * w + (j / 2)) * ch)];
      T* dst = &out.data[static_cast<size_t>((i * 2 * w + j) * ch)];
      std::copy(src, src + ch, dst);
    }
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "upsample_nearest_2x");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id, h, w, ch]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gx = grad_ptr(x))
        for (int64_t i = 0; i < 2 * h; ++i)
          for (int64_t j = 0; j < 2 * w; ++j) {
            const T* src = &g.data[static_cast<size_t>((i * 2 * w + j) * ch)];
            T* dst = &gx->data[static_cast<size_t>(((i / 2) * w + (j / 2)) * ch)];
            for (int64_t c = 0; c < ch; ++c) dst[c] += src[c];
          }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::embedding_lookup(Id table, const std::vector<int32_t>& idx) {
  const Tensor<T>& tv = value(table);
  if (tv.rank() != 2) shape_fail("embedding_lookup", shape_str(tv.shape));
  int64_t v = tv.dim(0), m = tv.dim(1);
  for (int32_t i : idx)
    if (i < 0 || i >= v)
      throw CorpusError("embedding_lookup: unknown token id " + std::to_string(i) + " (vocab " +
                        std::to_string(v) + ")");
  int64_t n = static_cast<int64_t>(idx.size());
  Tensor<T> out(Shape{n, m});
  for (int64_t i = 0; i < n; ++i)
    std::copy(&tv.data[static_cast<size_t>(idx[static_cast<size_t>(i)] * m)],
              &tv.data[static_cast<size_t>((idx[static_cast<size_t>(i)] + 1) * m)],
              &out.data[static_cast<size_t>(i * m)]);
  bool rg = requires_grad(table);
  Id id = push(std::move(out), rg, "embedding_lookup");
  if (rg) {
    auto idx_copy = std::make_shared<std::vector<int32_t>>(idx);
    nodes_[static_cast<size_t>(id)].backprop = [this, table, id, idx_copy, m]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gt = grad_ptr(table))
        for (size_t i = 0; i < idx_copy->size(); ++i)
          for (int64_t c = 0; c < m; ++c)
            gt->data[static_cast<size_t>((*idx_copy)[i] * m + c)] += g.data[i * static_cast<size_t>(m) + static_cast<size_t>(c)];
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::pairwise_table(Id head, Id tail, Id dist_emb, int64_t clamp) {
  const Tensor<T>& hv = value(head);
  const Tensor<T>& tv = value(tail);
  const Tensor<T>& dv = value(dist_emb);
  if (hv.rank() != 2 || !hv.same_shape(tv)) shape_fail("pairwise_table", "head/tail mismatch");
  if (dv.rank() != 2 || dv.dim(0) != clamp + 1) shape_fail("pairwise_table", "distance table mismatch");
  int64_t n = hv.dim(0), d = hv.dim(1), c = dv.dim(1);
  int64_t v = 4 * d + c;
  Tensor<T> out(Shape{n, n, v});
  for (int64_t i = 0; i < n; ++i) {
    const T* hrow = &hv.data[static_cast<size_t>(i * d)];
    for (int64_t j = 0; j < n; ++j) {
      const T* trow = &tv.data[static_cast<size_t>(j * d)];
      T* cell = &out.data[static_cast<size_t>((i * n + j) * v)];
      int64_t dist = std::min(i > j ? i - j : j - i, clamp);
      const T* drow = &dv.data[static_cast<size_t>(dist * c)];
      for (int64_t k = 0; k < d; ++k) {
        cell[k] = hrow[k];
        cell[d + k] = trow[k];
        cell[2 * d + k] = hrow[k] - trow[k];
        cell[3 * d + k] = hrow[k] * trow[k];
      }
      std::copy(drow, drow + c, cell + 4 * d);
    }
  }
  bool rg = requires_grad(head) || requires_grad(tail) || requires_grad(dist_emb);
  Id id = push(std::move(out), rg, "pairwise_table");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, head, tail, dist_emb, id, n, d, c, v, clamp]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& hv2 = value(head);
      const Tensor<T>& tv2 = value(tail);
      Tensor<T>* gh = grad_ptr(head);
      Tensor<T>* gt = grad_ptr(tail);
      Tensor<T>* gd = grad_ptr(dist_emb);
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
          const T* cell = &g.data[static_cast<size_t>((i * n + j) * v)];
          int64_t dist = std::min(i > j ? i - j : j - i, clamp);
          if (gh) {
            T* ghrow = &gh->data[static_cast<size_t>(i * d)];
            const T* trow = &tv2.data[static_cast<size_t>(j * d)];
            for (int64_t k = 0; k < d; ++k)
              ghrow[k] += cell[k] + cell[2 * d + k] + trow[k] * cell[3 * d + k];
          }
          if (gt) {
            T* gtrow = &gt->data[static_cast<size_t>(j * d)];
            const T* hrow = &hv2.data[static_cast<size_t>(i * d)];
            for (int64_t k = 0; k < d; ++k)
              gtrow[k] += cell[d + k] - cell[2 * d + k] + hrow[k] * cell[3 * d + k];
          }
          if (gd) {
            T* gdrow = &gd->data[static_cast<size_t>(dist * c)];
            for (int64_t k = 0; k < c; ++k) gdrow[k] += cell[4 * d + k];
          }
        }
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::biaffine_table(Id head, Id tail, Id u, Id w, Id b) {
  const Tensor<T>& hv = value(head);
  const Tensor<T>& tv = value(tail);
  const Tensor<T>& uv = value(u);
  const Tensor<T>& wv = value(w);
  const Tensor<T>& bv = value(b);
  if (hv.rank() != 2 || !hv.same_shape(tv)) shape_fail("biaffine_table", "head/tail mismatch");
  int64_t n = hv.dim(0), d = hv.dim(1);
  if (uv.rank() != 3 || uv.dim(0) != d || uv.dim(2) != d) shape_fail("biaffine_table", "U mismatch");
  int64_t o = uv.dim(1);
  if (wv.rank() != 2 || wv.dim(0) != 2 * d || wv.dim(1) != o || bv.numel() != o)
    shape_fail("biaffine_table", "W/b mismatch");
  // uh[i,oc,bd] = sum_a head[i,a] * U[a,oc,bd]
  auto uh = std::make_shared<Tensor<T>>(Shape{n, o, d});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t a = 0; a < d; ++a) {
      T hval = hv(i, a);
      const T* ubase = &uv.data[static_cast<size_t>(a * o * d)];
      T* uhrow = &uh->data[static_cast<size_t>(i * o * d)];
      for (int64_t k = 0; k < o * d; ++k) uhrow[k] += hval * ubase[k];
    }
  Tensor<T> out(Shape{n, n, o});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      T* cell = &out.data[static_cast<size_t>((i * n + j) * o)];
      for (int64_t oc = 0; oc < o; ++oc) {
        T acc = bv.data[static_cast<size_t>(oc)];
        const T* uhrow = &uh->data[static_cast<size_t>((i * o + oc) * d)];
        const T* trow = &tv.data[static_cast<size_t>(j * d)];
        for (int64_t k = 0; k < d; ++k) acc += uhrow[k] * trow[k];
        for (int64_t a = 0; a < d; ++a) acc += wv(a, oc) * hv(i, a);
        for (int64_t k = 0; k < d; ++k) acc += wv(d + k, oc) * trow[k];
        cell[oc] = acc;
      }
    }
  }
  bool rg = requires_grad(head) || requires_grad(tail) || requires_grad(u) || requires_grad(w) ||
            requires_grad(b);
  Id id = push(std::move(out), rg, "biaffine_table");
  if (rg) {
    nodes_[static_cast<size_t>(id)].backprop = [this, head, tail, u, w, b, id, n, d, o, uh]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& hv2 = value(head);
      const Tensor<T>& tv2 = value(tail);
      const Tensor<T>& uv2 = value(u);
      const Tensor<T>& wv2 = value(w);
      Tensor<T>* gh = grad_ptr(head);
      Tensor<T>* gt = grad_ptr(tail);
      Tensor<T>* gu = grad_ptr(u);
      Tensor<T>* gw = grad_ptr(w);
      Tensor<T>* gb = grad_ptr(b);
      // rowsum[i,oc] = sum_j dout; colsum[j,oc] = sum_i dout
      Tensor<T> rowsum(Shape{n, o}), colsum(Shape{n, o});
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
          const T* cell = &g.data[static_cast<size_t>((i * n + j) * o)];
          for (int64_t oc = 0; oc < o; ++oc) {
            rowsum(i, oc) += cell[oc];
            colsum(j, oc) += cell[oc];
          }
        }
      if (gb)
        for (int64_t i = 0; i < n; ++i)
          for (int64_t oc = 0; oc < o; ++oc) gb->data[static_cast<size_t>(oc)] += rowsum(i, oc);
      if (gw) {
        for (int64_t a = 0; a < d; ++a)
          for (int64_t oc = 0; oc < o; ++oc) {
            T acc_h = T(0), acc_t = T(0);
            for (int64_t i = 0; i < n; ++i) acc_h += hv2(i, a) * rowsum(i, oc);
            for (int64_t j = 0; j < n; ++j) acc_t += tv2(j, a) * colsum(j, oc);
            gw->data[static_cast<size_t>(a * o + oc)] += acc_h;
            gw->data[static_cast<size_t>((d + a) * o + oc)] += acc_t;
          }
      }
      // m[i,oc,bd] = sum_j dout(i,j,oc) * tail[j,bd]
      Tensor<T> m(Shape{n, o, d});
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
          const T* cell = &g.data[static_cast<size_t>((i * n + j) * o)];
          const T* trow = &tv2.data[static_cast<size_t>(j * d)];
          for (int64_t oc = 0; oc < o; ++oc) {
            T gval = cell[oc];
            T* mrow = &m.data[static_cast<size_t>((i * o + oc) * d)];
            for (int64_t k = 0; k < d; ++k) mrow[k] += gval * trow[k];
          }
        }
      if (gu) {
        for (int64_t a = 0; a < d; ++a) {
          T* gubase = &gu->data[static_cast<size_t>(a * o * d)];
          for (int64_t i = 0; i < n; ++i) {
            T hval = hv2(i, a);
            const T* mrow = &m.data[static_cast<size_t>(i * o * d)];
            for (int64_t k = 0; k < o * d; ++k) gubase[k] += hval * mrow[k];
          }
        }
      }
      if (gh) {
        for (int64_t i = 0; i < n; ++i)
          for (int64_t a = 0; a < d; ++a) {
            T acc = T(0);
            const T* ubase = &uv2.data[static_cast<size_t>(a * o * d)];
            const T* mrow = &m.data[static_cast<size_t>(i * o * d)];
            for (int64_t k = 0; k < o * d; ++k) acc += ubase[k] * mrow[k];
            for (int64_t oc = 0; oc < o; ++oc) acc += wv2(a, oc) * rowsum(i, oc);
            gh->data[static_cast<size_t>(i * d + a)] += acc;
          }
      }
      if (gt) {
        for (int64_t j = 0; j < n; ++j)
          for (int64_t k = 0; k < d; ++k) {
            T acc = T(0);
            for (int64_t oc = 0; oc < o; ++oc) acc += wv2(d + k, oc) * colsum(j, oc);
            gt->data[static_cast<size_t>(j * d + k)] += acc;
          }
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < n; ++j) {
            const T* cell = &g.data[static_cast<size_t>((i * n + j) * o)];
            T* gtrow = &gt->data[static_cast<size_t>(j * d)];
            for (int64_t oc = 0; oc < o; ++oc) {
              T gval = cell[oc];
              const T* uhrow = &uh->data[static_cast<size_t>((i * o + oc) * d)];
              for (int64_t k = 0; k < d; ++k) gtrow[k] += gval * uhrow[k];
            }
          }
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::spmm(const SparseCoeffs& a, Id x) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 2 || xv.dim(0) != a.n) shape_fail("spmm", shape_str(xv.shape));
  int64_t n = a.n, c = xv.dim(1);
  Tensor<T> out(Shape{n, c});
  for (int64_t r = 0; r < n; ++r) {
    T* orow = &out.data[static_cast<size_t>(r * c)];
    for (int64_t e = a.row_ptr[static_cast<size_t>(r)]; e < a.row_ptr[static_cast<size_t>(r + 1)]; ++e) {
      T wv = static_cast<T>(a.w[static_cast<size_t>(e)]);
      const T* xrow = &xv.data[static_cast<size_t>(a.col[static_cast<size_t>(e)] * c)];
      for (int64_t k = 0; k < c; ++k) orow[k] += wv * xrow[k];
    }
  }
  bool rg = requires_grad(x);
  Id id = push(std::move(out), rg, "spmm");
  if (rg) {
    auto coeffs = std::make_shared<SparseCoeffs>(a);
    nodes_[static_cast<size_t>(id)].backprop = [this, x, id, coeffs, n, c]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      if (Tensor<T>* gx = grad_ptr(x)) {
        for (int64_t r = 0; r < n; ++r) {
          const T* grow = &g.data[static_cast<size_t>(r * c)];
          for (int64_t e = coeffs->row_ptr[static_cast<size_t>(r)]; e < coeffs->row_ptr[static_cast<size_t>(r + 1)]; ++e) {
            T wv = static_cast<T>(coeffs->w[static_cast<size_t>(e)]);
            T* xrow = &gx->data[static_cast<size_t>(coeffs->col[static_cast<size_t>(e)] * c)];
            for (int64_t k = 0; k < c; ++k) xrow[k] += wv * grow[k];
          }
        }
      }
    };
  }
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::cross_entropy(Id logits, const std::vector<int32_t>& target,
                                            const std::vector<uint8_t>& mask) {
  const Tensor<T>& lv = value(logits);
  if (lv.rank() != 2) shape_fail("cross_entropy", shape_str(lv.shape));
  int64_t r = lv.dim(0), k = lv.dim(1);
  if (static_cast<int64_t>(target.size()) != r || static_cast<int64_t>(mask.size()) != r)
    shape_fail("cross_entropy", "target/mask length mismatch");
  int64_t count = 0;
  for (uint8_t m : mask) count += m ? 1 : 0;
  if (count == 0) shape_fail("cross_entropy", "empty mask");
  auto probs = std::make_shared<Tensor<T>>(Shape{r, k});
  T total = T(0);
  for (int64_t i = 0; i < r; ++i) {
    const T* row = &lv.data[static_cast<size_t>(i * k)];
    T* prow = &probs->data[static_cast<size_t>(i * k)];
    T mx = row[0];
    for (int64_t c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    T denom = T(0);
    for (int64_t c = 0; c < k; ++c) {
      T e = static_cast<T>(std::exp(static_cast<double>(row[c] - mx)));
      prow[c] = e;
      denom += e;
    }
    for (int64_t c = 0; c < k; ++c) prow[c] /= denom;
    if (mask[static_cast<size_t>(i)]) {
      int32_t t = target[static_cast<size_t>(i)];
      if (t < 0 || t >= k)
        throw CorpusError("cross_entropy: target index " + std::to_string(t) + " out of range");
      T lse = mx + static_cast<T>(std::log(static_cast<double>(denom)));
      total += lse - row[t];
    }
  }
  Tensor<T> out(Shape{1});
  out.data[0] = total / static_cast<T>(count);
  bool rg = requires_grad(logits);
  Id id = push(std::move(out), rg, "cross_entropy");
  if (rg) {
    auto tgt = std::make_shared<std::vector<int32_t>>(target);
    auto msk = std::make_shared<std::vector<uint8_t>>(mask);
    nodes_[static_cast<size_t>(id)].backprop = [this, logits, id, probs, tgt, msk, r, k, count]() {
      T gl = nodes_[static_cast<size_t>(id)].grad.data[0];
      if (Tensor<T>* gx = grad_ptr(logits)) {
        T inv = gl / static_cast<T>(count);
        for (int64_t i = 0; i < r; ++i) {
          if (!(*msk)[static_cast<size_t>(i)]) continue;
          const T* prow = &probs->data[static_cast<size_t>(i * k)];
          T* grow = &gx->data[static_cast<size_t>(i * k)];
          int32_t t = (*tgt)[static_cast<size_t>(i)];
          for (int64_t c = 0; c < k; ++c) grow[c] += inv * (prow[c] - (c == t ? T(1) : T(0)));
        }
      }
    };
  }
  return id;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

template <typename T>
void Tape<T>::backward(Id loss) {
  Node& ln = nodes_[static_cast<size_t>(loss)];
  if (ln.value.numel() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(ln.value.shape));
  for (size_t i = 0; i <= static_cast<size_t>(loss); ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad) {
      n.grad = Tensor<T>(n.value.shape);
    }
  }
  if (!ln.requires_grad)
    throw ShapeError("backward: loss does not depend on any trainable input");
  ln.grad.data[0] = T(1);
  for (int64_t i = loss; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.requires_grad && n.backprop) n.backprop();
  }
  for (size_t i = 0; i <= static_cast<size_t>(loss); ++i) {
    Node& n = nodes_[i];
    if (n.bound && n.requires_grad && n.bound->trainable) {
      for (int64_t j = 0; j < n.grad.numel(); ++j) n.bound->grad.data[static_cast<size_t>(j)] += n.grad.data[static_cast<size_t>(j)];
    }
  }
}

template class Tape<float>;
template class Tape<double>;

// ---------------------------------------------------------------------------
// Finite-difference checker
// ---------------------------------------------------------------------------

template <typename T>
GradCheckReport<T> grad_check(const std::vector<std::pair<std::string, Tensor<T>*>>& inputs,
                              const std::function<T()>& forward_loss,
                              const std::function<std::vector<Tensor<T>>()>& analytic_grads,
                              T eps) {
  int64_t total = 0;
  for (const auto& [name, t] : inputs) total += t->numel();
  if (total > 10000)
    throw ShapeError("grad_check: too many input elements (" + std::to_string(total) + " > 10000)");
  std::vector<Tensor<T>> grads = analytic_grads();
  if (grads.size() != inputs.size()) throw ShapeError("grad_check: gradient count mismatch");
  GradCheckReport<T> report;
  for (size_t t = 0; t < inputs.size(); ++t) {
    Tensor<T>* x = inputs[t].second;
    for (int64_t i = 0; i < x->numel(); ++i) {
      T saved = x->data[static_cast<size_t>(i)];
      x->data[static_cast<size_t>(i)] = saved + eps;
      double fp = static_cast<double>(forward_loss());
      x->data[static_cast<size_t>(i)] = saved - eps;
      double fm = static_cast<double>(forward_loss());
      x->data[static_cast<size_t>(i)] = saved;
      double numeric = (fp - fm) / (2.0 * static_cast<double>(eps));
      double analytic = static_cast<double>(grads[t].data[static_cast<size_t>(i)]);
      if (!std::isfinite(numeric) || !std::isfinite(analytic))
        throw NumericError("grad_check: non-finite intermediate at " + inputs[t].first);
      double rel = std::abs(analytic - numeric) /
                   std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_input = inputs[t].first;
        report.worst_coord = i;
      }
    }
  }
  return report;
}

template GradCheckReport<float> grad_check<float>(
    const std::vector<std::pair<std::string, Tensor<float>*>>&, const std::function<float()>&,
    const std::function<std::vector<Tensor<float>>()>&, float);
template GradCheckReport<double> grad_check<double>(
    const std::vector<std::pair<std::string, Tensor<double>*>>&, const std::function<double()>&,
    const std::function<std::vector<Tensor<double>>()>&, double);

}  // namespace hiore
