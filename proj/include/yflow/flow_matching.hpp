#pragma once

#include <functional>
#include <vector>

#include "yflow/rng.hpp"
#include "yflow/tensor.hpp"
#include "yflow/velocity_field.hpp"

namespace yflow {

// A coupled batch: row i of x0 is matched with row i of x1.
struct PairBatch {
  Tensor x0;
  Tensor x1;

  std::size_t size() const { return x0.rows(); }
  std::size_t dim() const { return x0.cols(); }
};

// Gaussian-bridge sample for one pair: x_t = (1-t) x0 + t x1 + sigma z.
struct BridgeSample {
  std::vector<double> x0, x1;
  double t = 0.0;
  double sigma = 0.0;
  std::vector<double> z;    // standard normal draw (empty when sigma = 0)
  std::vector<double> xt;   // interpolant
  std::vector<double> u;    // target drift x1 - x0
};

BridgeSample bridge_sample(std::vector<double> x0, std::vector<double> x1, double t,
                           double sigma, Pcg64& rng);

enum class CouplingMode { Independent, Ot };
CouplingMode coupling_from_string(const std::string& s);

// Couples two equal-size batches. Independent mode pairs x0 with a uniformly
// random permutation of x1 (deterministic in the rng state); Ot mode uses the
// minibatch optimal assignment.
PairBatch make_pairs(const Tensor& X0, const Tensor& X1, CouplingMode mode, Pcg64& rng);

// Field evaluated at per-row times; the network path wraps eval_multi.
using MultiField = std::function<Tensor(const Tensor& x, const std::vector<double>& t)>;

// Conditional flow-matching regression loss at explicit per-pair times:
// mean_i ||v(x_t_i, t_i) - (x1_i - x0_i)||^2. Draws bridge noise from rng when
// sigma > 0. Differentiable when the field is taped.
Tensor cfm_loss_at(const MultiField& field, const PairBatch& pairs, double sigma,
                   const std::vector<double>& times, Pcg64& rng);

// Same with t_i ~ Uniform[0,1] drawn from rng (all times first, then noise).
Tensor cfm_loss(const MultiField& field, const PairBatch& pairs, double sigma, Pcg64& rng);

}  // namespace yflow
