#pragma once

#include <cstdint>
#include <vector>

#include "yflow/tensor.hpp"

namespace yflow {

// Pairwise cost ||x_i - y_j||^p for p in {1, 2}. Plain (untaped) tensor; the
// differentiable Sinkhorn path uses pairwise_sqdist directly.
Tensor cost_matrix(const Tensor& X, const Tensor& Y, int p);

// 0.05 * mean(C) by default: a scale-relative entropic temperature.
double auto_epsilon(const Tensor& C, double factor = 0.05);

struct SinkhornResult {
  double value = 0.0;           // primal transport cost sum(plan * C), no entropy term
  Tensor plan;                  // [m, n], nonnegative, sums to ~1
  std::vector<double> f, g;     // converged log-domain potentials
  double max_row_violation = 0.0;  // max_i |sum_j plan_ij - a_i|
  double max_col_violation = 0.0;
  double plan_sum = 0.0;
};

// Log-domain Sinkhorn for OT_eps(a, b; C). `iterations` counts full sweeps
// (one f update + one g update). Plain doubles, no tape.
SinkhornResult sinkhorn_ot(const std::vector<double>& a, const std::vector<double>& b,
                           const Tensor& C, double epsilon, std::size_t iterations);

// Debiased divergence OT_eps(X,Y) - OT_eps(X,X)/2 - OT_eps(Y,Y)/2 between
// equal-weight empirical measures, squared-Euclidean ground cost, unrolled
// fixed-iteration differentiation. Differentiable w.r.t. taped X (and Y);
// the value is symmetric in (X, Y) bitwise and exactly 0 for X == Y.
Tensor sinkhorn_divergence(const Tensor& X, const Tensor& Y, double epsilon,
                           std::size_t iterations);

// Optimal assignment (row i -> column result[i]) minimizing sum of C[i][sigma(i)],
// O(n^3) shortest augmenting paths. Deterministic; scan order breaks ties toward
// lower column indices.
std::vector<std::size_t> solve_assignment(const Tensor& C);

// Exhaustive-minimum assignment for n <= 8 (test oracle).
std::vector<std::size_t> brute_force_assignment(const Tensor& C);

// Assignment cost summed in ascending row order (fixed order so oracle and
// solver comparisons are exact).
double assignment_cost(const Tensor& C, const std::vector<std::size_t>& sigma);

// Exact W_p between equal-size equal-weight samples: (assignment cost / n)^(1/p).
// Exhaustive for n <= 8, assignment algorithm up to n = 4096.
double exact_wasserstein(const Tensor& X, const Tensor& Y, int p);

// Unbiased U-statistic MMD with Gaussian kernel exp(-r^2 / (2 h^2)); reported
// value is max(MMD^2, 0)^(1/2). bandwidth <= 0 selects the median pairwise
// distance of the pooled sample. Needs at least 2 points per side.
double rbf_mmd(const Tensor& X, const Tensor& Y, double bandwidth = 0.0);

// Assignment minimizing sum ||x0_i - x1_sigma(i)||^2 (the OT-CFM coupling).
std::vector<std::size_t> minibatch_ot_coupling(const Tensor& X0, const Tensor& X1);

// At most `cap` rows, chosen without replacement, original order preserved;
// deterministic in seed. Returns X unchanged when it already fits.
Tensor subsample_rows(const Tensor& X, std::size_t cap, std::uint64_t seed);

}  // namespace yflow
