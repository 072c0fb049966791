#include "yflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace yflow {

// ---- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(Shape s) {
  Tensor t;
  t.shape = std::move(s);
  t.data = std::make_shared<std::vector<double>>(shape_numel(t.shape), 0.0);
  return t;
}

Tensor Tensor::full(Shape s, double v) {
  Tensor t = zeros(std::move(s));
  std::fill(t.data->begin(), t.data->end(), v);
  return t;
}

Tensor Tensor::from(Shape s, std::vector<double> v) {
  if (shape_numel(s) != v.size())
    throw std::invalid_argument("Tensor::from: " + shape_str(s) + " needs " +
                                std::to_string(shape_numel(s)) + " values, got " +
                                std::to_string(v.size()));
  Tensor t;
  t.shape = std::move(s);
  t.data = std::make_shared<std::vector<double>>(std::move(v));
  return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

std::size_t Tensor::rows() const {
  if (shape.empty()) throw std::invalid_argument("rows(): rank-0 tensor");
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() != 2) throw std::invalid_argument("cols(): tensor is not rank-2");
  return shape[1];
}

double Tensor::value() const {
  if (numel() != 1) throw std::invalid_argument("value(): tensor has " +
                                                std::to_string(numel()) + " elements");
  return (*data)[0];
}

double Tensor::at(std::size_t i) const { return data->at(i); }

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.tape = nullptr;
  t.node = -1;
  return t;
}

bool all_finite(const Tensor& t) {
  for (double v : *t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

// ---- Tape --------------------------------------------------------------------

Tensor Tape::watch(const Tensor& t) {
  Tensor out = t;
  out.tape = this;
  out.node = add_node(t.shape);
  return out;
}

int Tape::add_node(const Shape& shape) {
  shapes_.push_back(shape);
  return static_cast<int>(shapes_.size()) - 1;
}

void Tape::record(std::vector<int> inputs, int output, std::function<void(Tape&)> bw) {
  ops_.push_back(Op{std::move(inputs), output, std::move(bw)});
}

const std::vector<double>& Tape::grad_of(int node) const {
  return grads_[static_cast<std::size_t>(node)];
}

std::vector<double>& Tape::grad_accum(int node) {
  auto& g = grads_[static_cast<std::size_t>(node)];
  if (g.empty()) g.assign(shape_numel(shapes_[static_cast<std::size_t>(node)]), 0.0);
  return g;
}

std::unordered_map<int, Tensor> Tape::backward(const Tensor& loss) {
  if (!loss.on_tape() || loss.tape != this)
    throw std::invalid_argument("backward: loss is not on this tape");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape));

  grads_.assign(shapes_.size(), {});
  grad_accum(loss.node)[0] = 1.0;

  // Ops were appended in execution order, so the reverse scan visits every
  // node after all of its consumers: each op runs at most once.
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (grads_[static_cast<std::size_t>(it->output)].empty()) continue;
    it->backward(*this);
  }

  std::unordered_map<int, Tensor> out;
  out.reserve(grads_.size());
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (grads_[i].empty()) continue;
    Tensor g;
    g.shape = shapes_[i];
    g.data = std::make_shared<std::vector<double>>(std::move(grads_[i]));
    out.emplace(static_cast<int>(i), std::move(g));
  }
  grads_.clear();
  return out;
}

void Tape::clear() {
  shapes_.clear();
  ops_.clear();
  grads_.clear();
}

// ---- op plumbing -------------------------------------------------------------

namespace {

Tape* joint_tape(const Tensor& a, const Tensor& b) {
  if (a.tape && b.tape && a.tape != b.tape)
    throw std::invalid_argument("operands belong to different tapes");
  return a.tape ? a.tape : b.tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape) + " vs " + shape_str(b.shape));
}

void require_data(const Tensor& t, const char* op) {
  if (!t.data) throw std::invalid_argument(std::string(op) + ": empty tensor");
}

// GEMM kernels. ikj order keeps the inner loop a contiguous saxpy, which the
// compiler vectorises without reassociating any reduction, so results are
// bitwise reproducible. All kernels accumulate (C += ...).
void mm_accum(const double* A, const double* B, double* C,
              std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = A + i * k;
    double* crow = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// Out[k,n] += A^T G with A [m,k], G [m,n].
void mm_at_accum(const double* A, const double* G, double* out,
                 std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = A + i * k;
    const double* grow = G + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * grow[j];
    }
  }
}

// Out[m,k] += G B^T with G [m,n], B [k,n]; materialises B^T to keep the inner
// loop contiguous.
void mm_bt_accum(const double* G, const double* B, double* out,
                 std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = B[p * n + j];
  mm_accum(G, bt.data(), out, m, n, k);
}

Tensor make_output(Shape shape, Tape* tp) {
  Tensor out = Tensor::zeros(std::move(shape));
  if (tp) {
    out.tape = tp;
    out.node = tp->add_node(out.shape);
  }
  return out;
}

// Shorthand for elementwise unary ops: y_i = f(x_i), dx_i += g_i * dfdx_i
// where dfdx is captured as a precomputed buffer.
Tensor unary_with_deriv(const Tensor& a, const char* name,
                        const std::function<double(double)>& f,
                        const std::function<double(double, double)>& dfdx_of) {
  require_data(a, name);
  Tensor out = make_output(a.shape, a.tape);
  const auto& x = *a.data;
  auto& y = *out.data;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  if (a.on_tape()) {
    auto deriv = std::make_shared<std::vector<double>>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) (*deriv)[i] = dfdx_of(x[i], y[i]);
    int an = a.node, on = out.node;
    a.tape->record({an}, on, [an, on, deriv](Tape& t) {
      const auto& go = t.grad_of(on);
      auto& ga = t.grad_accum(an);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (*deriv)[i];
    });
  }
  return out;
}

}  // namespace

// ---- arithmetic --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_data(a, "add");
  require_data(b, "add");
  require_same_shape(a, b, "add");
  Tape* tp = joint_tape(a, b);
  Tensor out = make_output(a.shape, tp);
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (tp) {
    int an = a.on_tape() ? a.node : -1;
    int bn = b.on_tape() ? b.node : -1;
    int on = out.node;
    tp->record({an, bn}, on, [an, bn, on](Tape& t) {
      const auto& go = t.grad_of(on);
      if (an >= 0) {
        auto& ga = t.grad_accum(an);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (bn >= 0) {
        auto& gb = t.grad_accum(bn);
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_data(a, "sub");
  require_data(b, "sub");
  require_same_shape(a, b, "sub");
  Tape* tp = joint_tape(a, b);
  Tensor out = make_output(a.shape, tp);
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (tp) {
    int an = a.on_tape() ? a.node : -1;
    int bn = b.on_tape() ? b.node : -1;
    int on = out.node;
    tp->record({an, bn}, on, [an, bn, on](Tape& t) {
      const auto& go = t.grad_of(on);
      if (an >= 0) {
        auto& ga = t.grad_accum(an);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (bn >= 0) {
        auto& gb = t.grad_accum(bn);
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_data(a, "mul");
  require_data(b, "mul");
  require_same_shape(a, b, "mul");
  Tape* tp = joint_tape(a, b);
  Tensor out = make_output(a.shape, tp);
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (tp) {
    int an = a.on_tape() ? a.node : -1;
    int bn = b.on_tape() ? b.node : -1;
    int on = out.node;
    auto ad = a.data;
    auto bd = b.data;
    tp->record({an, bn}, on, [an, bn, on, ad, bd](Tape& t) {
      const auto& go = t.grad_of(on);
      if (an >= 0) {
        auto& ga = t.grad_accum(an);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (*bd)[i];
      }
      if (bn >= 0) {
        auto& gb = t.grad_accum(bn);
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * (*ad)[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  require_data(a, "scale");
  Tensor out = make_output(a.shape, a.tape);
  const auto& av = *a.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * c;
  if (a.on_tape()) {
    int an = a.node, on = out.node;
    a.tape->record({an}, on, [an, on, c](Tape& t) {
      const auto& go = t.grad_of(on);
      auto& ga = t.grad_accum(an);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  require_data(a, "add_scalar");
  Tensor out = make_output(a.shape, a.tape);
  const auto& av = *a.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + c;
  if (a.on_tape()) {
    int an = a.node, on = out.node;
    a.tape->record({an}, on, [an, on](Tape& t) {
      const auto& go = t.grad_of(on);
      auto& ga = t.grad_accum(an);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  require_data(a, "sum");
  Tensor out = make_output({1}, a.tape);
  double s = 0.0;
  for (double v : *a.data) s += v;
  (*out.data)[0] = s;
  if (a.on_tape()) {
    int an = a.node, on = out.node;
    std::size_t n = a.numel();
    a.tape->record({an}, on, [an, on, n](Tape& t) {
      double g = t.grad_of(on)[0];
      auto& ga = t.grad_accum(an);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    });
  }
  return out;
}

Tensor square(const Tensor& a) {
  return unary_with_deriv(a, "square",
                          [](double x) { return x * x; },
                          [](double x, double) { return 2.0 * x; });
}

Tensor exp_t(const Tensor& a) {
  return unary_with_deriv(a, "exp",
                          [](double x) { return std::exp(x); },
                          [](double, double y) { return y; });
}

namespace {
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Tensor silu(const Tensor& a) {
  return unary_with_deriv(a, "silu",
                          [](double x) { return x * sigmoid(x); },
                          [](double x, double) {
                            double s = sigmoid(x);
                            return s * (1.0 + x * (1.0 - s));
                          });
}

Tensor tanh_t(const Tensor& a) {
  return unary_with_deriv(a, "tanh",
                          [](double x) { return std::tanh(x); },
                          [](double, double y) { return 1.0 - y * y; });
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_data(a, "matmul");
  require_data(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: rank-2 operands required, got " +
                                shape_str(a.shape) + " x " + shape_str(b.shape));
  if (a.shape[1] != b.shape[0])
    throw std::invalid_argument("matmul: inner dimensions differ, " +
                                shape_str(a.shape) + " x " + shape_str(b.shape));
  std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tape* tp = joint_tape(a, b);
  Tensor out = make_output({m, n}, tp);
  mm_accum(a.data->data(), b.data->data(), out.data->data(), m, k, n);
  if (tp) {
    int an = a.on_tape() ? a.node : -1;
    int bn = b.on_tape() ? b.node : -1;
    int on = out.node;
    auto ad = a.data;
    auto bd = b.data;
    tp->record({an, bn}, on, [an, bn, on, ad, bd, m, k, n](Tape& t) {
      const auto& go = t.grad_of(on);
      if (an >= 0) mm_bt_accum(go.data(), bd->data(), t.grad_accum(an).data(), m, k, n);
      if (bn >= 0) mm_at_accum(ad->data(), go.data(), t.grad_accum(bn).data(), m, k, n);
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_data(m, "add_rowvec");
  require_data(v, "add_rowvec");
  if (m.rank() != 2 || v.numel() != m.shape[1])
    throw std::invalid_argument("add_rowvec: " + shape_str(m.shape) + " + " +
                                shape_str(v.shape));
  std::size_t r = m.shape[0], c = m.shape[1];
  Tape* tp = joint_tape(m, v);
  Tensor out = make_output(m.shape, tp);
  const auto& mv = *m.data;
  const auto& vv = *v.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) ov[i * c + j] = mv[i * c + j] + vv[j];
  if (tp) {
    int mn = m.on_tape() ? m.node : -1;
    int vn = v.on_tape() ? v.node : -1;
    int on = out.node;
    tp->record({mn, vn}, on, [mn, vn, on, r, c](Tape& t) {
      const auto& go = t.grad_of(on);
      if (mn >= 0) {
        auto& gm = t.grad_accum(mn);
        for (std::size_t i = 0; i < go.size(); ++i) gm[i] += go[i];
      }
      if (vn >= 0) {
        auto& gv = t.grad_accum(vn);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gv[j] += go[i * c + j];
      }
    });
  }
  return out;
}

Tensor add_colvec(const Tensor& m, const Tensor& v) {
  require_data(m, "add_colvec");
  require_data(v, "add_colvec");
  if (m.rank() != 2 || v.numel() != m.shape[0])
    throw std::invalid_argument("add_colvec: " + shape_str(m.shape) + " + " +
                                shape_str(v.shape));
  std::size_t r = m.shape[0], c = m.shape[1];
  Tape* tp = joint_tape(m, v);
  Tensor out = make_output(m.shape, tp);
  const auto& mv = *m.data;
  const auto& vv = *v.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) ov[i * c + j] = mv[i * c + j] + vv[i];
  if (tp) {
    int mn = m.on_tape() ? m.node : -1;
    int vn = v.on_tape() ? v.node : -1;
    int on = out.node;
    tp->record({mn, vn}, on, [mn, vn, on, r, c](Tape& t) {
      const auto& go = t.grad_of(on);
      if (mn >= 0) {
        auto& gm = t.grad_accum(mn);
        for (std::size_t i = 0; i < go.size(); ++i) gm[i] += go[i];
      }
      if (vn >= 0) {
        auto& gv = t.grad_accum(vn);
        for (std::size_t i = 0; i < r; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < c; ++j) s += go[i * c + j];
          gv[i] += s;
        }
      }
    });
  }
  return out;
}

Tensor tile_rows(const Tensor& v, std::size_t m) {
  require_data(v, "tile_rows");
  std::size_t n = v.numel();
  Tensor out = make_output({m, n}, v.tape);
  const auto& vv = *v.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < m; ++i)
    std::memcpy(ov.data() + i * n, vv.data(), n * sizeof(double));
  if (v.on_tape()) {
    int vn = v.node, on = out.node;
    v.tape->record({vn}, on, [vn, on, m, n](Tape& t) {
      const auto& go = t.grad_of(on);
      auto& gv = t.grad_accum(vn);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gv[j] += go[i * n + j];
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_data(a, "concat_cols");
  require_data(b, "concat_cols");
  if (a.rank() != 2 || b.rank() != 2 || a.shape[0] != b.shape[0])
    throw std::invalid_argument("concat_cols: " + shape_str(a.shape) + " | " +
                                shape_str(b.shape));
  std::size_t r = a.shape[0], p = a.shape[1], q = b.shape[1];
  Tape* tp = joint_tape(a, b);
  Tensor out = make_output({r, p + q}, tp);
  const auto& av = *a.data;
  const auto& bv = *b.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < r; ++i) {
    std::memcpy(ov.data() + i * (p + q), av.data() + i * p, p * sizeof(double));
    std::memcpy(ov.data() + i * (p + q) + p, bv.data() + i * q, q * sizeof(double));
  }
  if (tp) {
    int an = a.on_tape() ? a.node : -1;
    int bn = b.on_tape() ? b.node : -1;
    int on = out.node;
    tp->record({an, bn}, on, [an, bn, on, r, p, q](Tape& t) {
      const auto& go = t.grad_of(on);
      if (an >= 0) {
        auto& ga = t.grad_accum(an);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += go[i * (p + q) + j];
      }
      if (bn >= 0) {
        auto& gb = t.grad_accum(bn);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += go[i * (p + q) + p + j];
      }
    });
  }
  return out;
}

// ---- reductions with stored forward state ------------------------------------

Tensor lse_rows(const Tensor& m) {
  require_data(m, "lse_rows");
  if (m.rank() != 2) throw std::invalid_argument("lse_rows: rank-2 required");
  std::size_t r = m.shape[0], c = m.shape[1];
  Tensor out = make_output({r}, m.tape);
  // E holds exp(m - rowmax), S the row sums; both reused by backward.
  auto E = std::make_shared<std::vector<double>>(r * c);
  auto S = std::make_shared<std::vector<double>>(r);
  const auto& mv = *m.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, mv[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double e = std::exp(mv[i * c + j] - mx);
      (*E)[i * c + j] = e;
      s += e;
    }
    (*S)[i] = s;
    ov[i] = mx + std::log(s);
  }
  if (m.on_tape()) {
    int mn = m.node, on = out.node;
    m.tape->record({mn}, on, [mn, on, E, S, r, c](Tape& t) {
      const auto& go = t.grad_of(on);
      auto& gm = t.grad_accum(mn);
      for (std::size_t i = 0; i < r; ++i) {
        double w = go[i] / (*S)[i];
        for (std::size_t j = 0; j < c; ++j) gm[i * c + j] += w * (*E)[i * c + j];
      }
    });
  }
  return out;
}

Tensor lse_cols(const Tensor& m) {
  require_data(m, "lse_cols");
  if (m.rank() != 2) throw std::invalid_argument("lse_cols: rank-2 required");
  std::size_t r = m.shape[0], c = m.shape[1];
  Tensor out = make_output({c}, m.tape);
  auto E = std::make_shared<std::vector<double>>(r * c);
  auto S = std::make_shared<std::vector<double>>(c);
  const auto& mv = *m.data;
  auto& ov = *out.data;
  std::vector<double> mx(c, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) mx[j] = std::max(mx[j], mv[i * c + j]);
  std::fill(S->begin(), S->end(), 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double e = std::exp(mv[i * c + j] - mx[j]);
      (*E)[i * c + j] = e;
      (*S)[j] += e;
    }
  for (std::size_t j = 0; j < c; ++j) ov[j] = mx[j] + std::log((*S)[j]);
  if (m.on_tape()) {
    int mn = m.node, on = out.node;
    m.tape->record({mn}, on, [mn, on, E, S, r, c](Tape& t) {
      const auto& go = t.grad_of(on);
      auto& gm = t.grad_accum(mn);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          gm[i * c + j] += go[j] / (*S)[j] * (*E)[i * c + j];
    });
  }
  return out;
}

Tensor pairwise_sqdist(const Tensor& x, const Tensor& y) {
  require_data(x, "pairwise_sqdist");
  require_data(y, "pairwise_sqdist");
  if (x.rank() != 2 || y.rank() != 2 || x.shape[1] != y.shape[1])
    throw std::invalid_argument("pairwise_sqdist: " + shape_str(x.shape) + " vs " +
                                shape_str(y.shape));
  std::size_t m = x.shape[0], n = y.shape[0], d = x.shape[1];
  Tape* tp = joint_tape(x, y);
  Tensor out = make_output({m, n}, tp);
  const auto& xv = *x.data;
  const auto& yv = *y.data;
  auto& ov = *out.data;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        double diff = xv[i * d + c] - yv[j * d + c];
        s += diff * diff;
      }
      ov[i * n + j] = s;
    }
  if (tp) {
    int xn = x.on_tape() ? x.node : -1;
    int yn = y.on_tape() ? y.node : -1;
    int on = out.node;
    auto xd = x.data;
    auto yd = y.data;
    tp->record({xn, yn}, on, [xn, yn, on, xd, yd, m, n, d](Tape& t) {
      const auto& go = t.grad_of(on);
      std::vector<double>* gx = xn >= 0 ? &t.grad_accum(xn) : nullptr;
      std::vector<double>* gy = yn >= 0 ? &t.grad_accum(yn) : nullptr;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double w = 2.0 * go[i * n + j];
          if (w == 0.0) continue;
          for (std::size_t c = 0; c < d; ++c) {
            double diff = (*xd)[i * d + c] - (*yd)[j * d + c];
            if (gx) (*gx)[i * d + c] += w * diff;
            if (gy) (*gy)[j * d + c] -= w * diff;
          }
        }
    });
  }
  return out;
}

Tensor smooth_norm_power(const Tensor& v, double alpha, double delta) {
  require_data(v, "smooth_norm_power");
  if (!(alpha > 0.0) || alpha > 2.0)
    throw std::invalid_argument("smooth_norm_power: alpha must be in (0, 2], got " +
                                std::to_string(alpha));
  if (!(delta > 0.0))
    throw std::invalid_argument("smooth_norm_power: delta must be > 0, got " +
                                std::to_string(delta));
  std::size_t r, d;
  if (v.rank() == 2) {
    r = v.shape[0];
    d = v.shape[1];
  } else if (v.rank() == 1) {
    r = 1;
    d = v.shape[0];
  } else {
    throw std::invalid_argument("smooth_norm_power: rank-1 or rank-2 required");
  }
  Tensor out = make_output({r}, v.tape);
  const double d2 = delta * delta;
  const double off = std::pow(delta, alpha);
  const auto& vv = *v.data;
  auto& ov = *out.data;
  // F holds (||row||^2 + delta^2)^(alpha/2 - 1), the shared backward factor.
  auto F = std::make_shared<std::vector<double>>(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double x = vv[i * d + c];
      s += x * x;
    }
    double base = s + d2;
    ov[i] = std::pow(base, 0.5 * alpha) - off;
    (*F)[i] = base > 0.0 ? std::pow(base, 0.5 * alpha - 1.0) : 0.0;
  }
  if (v.on_tape()) {
    int vn = v.node, on = out.node;
    auto vd = v.data;
    v.tape->record({vn}, on, [vn, on, vd, F, r, d, alpha](Tape& t) {
      const auto& go = t.grad_of(on);
      auto& gv = t.grad_accum(vn);
      for (std::size_t i = 0; i < r; ++i) {
        double w = go[i] * alpha * (*F)[i];
        for (std::size_t c = 0; c < d; ++c) gv[i * d + c] += w * (*vd)[i * d + c];
      }
    });
  }
  return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

}  // namespace yflow
