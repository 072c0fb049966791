#pragma once

#include <functional>
#include <vector>

#include "yflow/tensor.hpp"
#include "yflow/velocity_field.hpp"

namespace yflow {

// Time grid 0 = t_0 < t_1 < ... < t_K = 1. Compressed-schedule harnesses use
// grids ending before 1; those are built with require_unit = false.
struct TimeGrid {
  std::vector<double> knots;

  static TimeGrid uniform(std::size_t K);
  static TimeGrid from_knots(std::vector<double> k, bool require_unit = true);

  std::size_t steps() const { return knots.empty() ? 0 : knots.size() - 1; }
  double dt(std::size_t k) const { return knots[k + 1] - knots[k]; }
};

enum class Scheme { Euler, Midpoint, Rk4 };

Scheme scheme_from_string(const std::string& s);

// N particles integrated over a grid: states[k] is [N, d] for k = 0..K;
// velocities[k] is the field evaluated at the left endpoint (x_{t_k}, t_k),
// which for Euler is exactly the step's drift.
struct TrajectoryBatch {
  std::vector<Tensor> states;
  std::vector<Tensor> velocities;
  TimeGrid grid;

  std::size_t particles() const { return states.empty() ? 0 : states[0].shape[0]; }
  std::size_t dim() const { return states.empty() ? 0 : states[0].shape[1]; }
};

using FieldFn = std::function<Tensor(const Tensor& x, double t)>;

// Fixed-grid integration of dx/dt = f(x, t). Gradients flow through every step
// when f produces taped tensors (backprop through the unrolled recursion);
// with plain tensors this is the detached fast path. A non-finite state or
// velocity aborts with a numeric_error naming the step index.
TrajectoryBatch integrate(const FieldFn& f, const Tensor& x0, const TimeGrid& grid,
                          Scheme scheme = Scheme::Euler);

// Network convenience wrapper. With record_tape the parameters are attached to
// `tape` first (the taped views are returned through attached_out so the
// caller can look up gradients); without it the master parameters are used and
// nothing is recorded.
TrajectoryBatch integrate(const VelocityNet& net, const Tensor& x0, const TimeGrid& grid,
                          Scheme scheme, bool record_tape, Tape* tape = nullptr,
                          std::vector<Tensor>* attached_out = nullptr);

// Lemma-2 time compression: returns the field v_s(x, t) = (1/s) f(x, t/s),
// which executes f's spatial path on [0, s]. s must lie in (0, 1].
FieldFn compress_schedule(FieldFn f, double s);

// Grid with every knot multiplied by s (the domain of the compressed field).
TimeGrid scale_grid(const TimeGrid& g, double s);

}  // namespace yflow
