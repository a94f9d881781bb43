#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hiore/common.hpp"
#include "hiore/params.hpp"
#include "hiore/tensor.hpp"

namespace hiore {

/// Fixed-coefficient sparse operator in CSR form (destinations over rows).
/// Coefficients are data, not differentiated through.
struct SparseCoeffs {
  int64_t n = 0;
  std::vector<int64_t> row_ptr;  // size n+1
  std::vector<int64_t> col;
  std::vector<double> w;
};

/// Recorded-graph reverse-mode engine. A tape is built per forward pass;
/// primitives are pure given their inputs and each registers a backward
/// rule. Confine a tape to one thread.
template <typename T>
class Tape {
 public:
  using Id = int32_t;

  explicit Tape(bool check_finite = true, bool record_grads = true)
      : check_finite_(check_finite), record_grads_(record_grads) {}

  // Leaves.
  Id constant(Tensor<T> v);
  Id input(Tensor<T> v, bool requires_grad);
  /// Copies the parameter value in; backward() adds the leaf gradient back
  /// into p.grad (only if p.trainable).
  Id param(Parameter<T>& p);

  // Elementwise and linear algebra.
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id scale(Id a, T s);
  Id matmul(Id a, Id b);      // [r,k] x [k,c]
  Id transpose(Id a);         // 2D
  Id linear(Id x, Id w, Id b);  // x[r,in] w[in,out] b[out]
  Id gelu(Id x);
  Id softmax(Id x, int axis);
  Id layer_norm(Id x, Id gamma, Id beta, T eps);
  Id dropout(Id x, T rate, uint64_t seed);
  Id sum(Id x);  // scalar

  // Shape plumbing.
  Id reshape(Id x, Shape shape);
  Id concat(const std::vector<Id>& xs, int axis);
  Id stack_last(const std::vector<Id>& xs);  // k of [a,b] -> [a,b,k]
  Id slice_cols(Id x, int64_t from, int64_t to);  // 2D, along axis 1
  Id pad2d(Id x, int64_t rows, int64_t cols);     // zero-pad bottom/right of [H,W,C]
  Id crop2d(Id x, int64_t rows, int64_t cols);    // top-left crop of [H,W,C]

  // Table / conv stack.
  Id conv2d_3x3(Id x, Id w, Id b);  // x[H,W,Ci] w[3,3,Ci,Co] b[Co], zero pad 1
  Id maxpool_2x2(Id x);             // H,W even
  Id upsample_nearest_2x(Id x);
  Id embedding_lookup(Id table, const std::vector<int32_t>& idx);
  /// Cell (i,j) = [head_i; tail_j; head_i - tail_j; head_i * tail_j;
  /// dist_emb[min(|i-j|, clamp)]] -> [n, n, 4d + c].
  Id pairwise_table(Id head, Id tail, Id dist_emb, int64_t clamp);
  /// Cell (i,j) = head_i^T U tail_j + W [head_i; tail_j] + b -> [n, n, out].
  Id biaffine_table(Id head, Id tail, Id u, Id w, Id b);
  Id spmm(const SparseCoeffs& a, Id x);  // x[N,C] -> [N,C]

  /// Mean negative log-likelihood over unmasked rows of logits[R,K].
  Id cross_entropy(Id logits, const std::vector<int32_t>& target,
                   const std::vector<uint8_t>& mask);

  const Tensor<T>& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
  /// Valid after backward(); empty tensor when the node required no grad.
  const Tensor<T>& grad(Id id) const { return nodes_[static_cast<size_t>(id)].grad; }
  bool requires_grad(Id id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Node gradients are reset each call;
  /// bound parameter gradients accumulate across calls until zero_grads.
  void backward(Id loss);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void()> backprop;
    Parameter<T>* bound = nullptr;
    bool requires_grad = false;
    const char* op = "";
  };

  Id push(Tensor<T> value, bool requires_grad, const char* op);
  Tensor<T>* grad_ptr(Id id);
  void check_value(Id id);
  [[noreturn]] void shape_fail(const char* op, const std::string& detail) const;

  std::vector<Node> nodes_;
  bool check_finite_;
  bool record_grads_;
};

extern template class Tape<float>;
extern template class Tape<double>;

/// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
/// with numeric as the central difference of forward_loss around each input
/// coordinate. forward_loss must be a pure function of the current contents
/// of *inputs; analytic_grads returns one same-shape gradient per input.
template <typename T>
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_input;
  int64_t worst_coord = -1;
};

template <typename T>
GradCheckReport<T> grad_check(const std::vector<std::pair<std::string, Tensor<T>*>>& inputs,
                              const std::function<T()>& forward_loss,
                              const std::function<std::vector<Tensor<T>>()>& analytic_grads,
                              T eps);

extern template GradCheckReport<float> grad_check<float>(
    const std::vector<std::pair<std::string, Tensor<float>*>>&, const std::function<float()>&,
    const std::function<std::vector<Tensor<float>>()>&, float);
extern template GradCheckReport<double> grad_check<double>(
    const std::vector<std::pair<std::string, Tensor<double>*>>&, const std::function<double()>&,
    const std::function<std::vector<Tensor<double>>()>&, double);

}  // namespace hiore
