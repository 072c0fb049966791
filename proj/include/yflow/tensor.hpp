#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "yflow/common.hpp"

namespace yflow {

class Tape;

// Dense double tensor with shared storage. When `tape` is set the tensor is a
// node in that tape's graph and participates in reverse-mode differentiation;
// otherwise it is a plain constant. Copies share storage.
struct Tensor {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  Tape* tape = nullptr;
  int node = -1;

  Tensor() = default;

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, double v);
  static Tensor from(Shape s, std::vector<double> v);
  static Tensor scalar(double v);

  std::size_t numel() const { return data ? data->size() : 0; }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double value() const;                 // scalar tensors only
  double at(std::size_t i) const;       // flat index
  std::vector<double>& vals() { return *data; }
  const std::vector<double>& vals() const { return *data; }

  bool on_tape() const { return tape != nullptr && node >= 0; }
  // Same storage, no tape membership: gradients never flow into or out of it.
  Tensor detached() const;
};

bool all_finite(const Tensor& t);

// Reverse-mode tape. Operations append nodes in execution order, which is a
// topological order by construction; backward() replays the recorded ops once,
// in reverse, accumulating adjoints.
class Tape {
 public:
  struct Op {
    std::vector<int> inputs;  // node ids of taped inputs; -1 marks a constant slot
    int output;
    std::function<void(Tape&)> backward;
  };

  // Registers a leaf: returns a view of `t` that lives on this tape.
  Tensor watch(const Tensor& t);

  // Recording interface used by the op implementations.
  int add_node(const Shape& shape);
  void record(std::vector<int> inputs, int output, std::function<void(Tape&)> bw);

  // Runs reverse accumulation from a scalar loss on this tape. Returns the
  // gradient for every node that received one, keyed by node id; leaves that
  // do not influence the loss (and anything detached) are absent.
  std::unordered_map<int, Tensor> backward(const Tensor& loss);

  // Adjoint access for backward closures.
  const std::vector<double>& grad_of(int node) const;
  std::vector<double>& grad_accum(int node);  // lazily zero-initialised

  std::size_t num_nodes() const { return shapes_.size(); }
  const std::vector<Op>& ops() const { return ops_; }
  const Shape& node_shape(int id) const { return shapes_[static_cast<std::size_t>(id)]; }

  void clear();

 private:
  std::vector<Shape> shapes_;
  std::vector<Op> ops_;
  std::vector<std::vector<double>> grads_;
};

// ---- differentiable operations ------------------------------------------------
// Each checks shapes, computes the forward value, and (when an argument is on a
// tape) records a backward closure. Mixing tensors from two different tapes is
// an error.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);           // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor sum(const Tensor& a);                            // -> scalar
Tensor square(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor tanh_t(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);        // [m,k]x[k,n] -> [m,n]
Tensor add_rowvec(const Tensor& m, const Tensor& v);    // [m,n] + broadcast [n]
Tensor add_colvec(const Tensor& m, const Tensor& v);    // [m,n] + broadcast [m]
Tensor tile_rows(const Tensor& v, std::size_t m);       // [n] -> [m,n]
Tensor concat_cols(const Tensor& a, const Tensor& b);   // [m,p]|[m,q] -> [m,p+q]

// Row-wise log-sum-exp (max-shifted): [m,n] -> [m]; column-wise: [m,n] -> [n].
Tensor lse_rows(const Tensor& m);
Tensor lse_cols(const Tensor& m);

// Squared Euclidean distance matrix: [m,d]x[n,d] -> [m,n].
Tensor pairwise_sqdist(const Tensor& x, const Tensor& y);

// Row-wise smoothed norm power: for each row v, (sum v^2 + delta^2)^(alpha/2)
// - delta^alpha. Input [n,d] -> [n]; a rank-1 input is treated as one row.
// Exact ||v||^alpha at delta = 0, differentiable at v = 0 for delta > 0.
Tensor smooth_norm_power(const Tensor& v, double alpha, double delta);

// Compositions.
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

}  // namespace yflow
