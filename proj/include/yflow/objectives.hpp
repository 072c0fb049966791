#pragma once

#include <cstdint>
#include <vector>

#include "yflow/integrator.hpp"
#include "yflow/rng.hpp"
#include "yflow/tensor.hpp"

namespace yflow {

struct ActionConfig {
  double alpha = 0.5;
  double delta = 1e-8;            // norm smoothing
  double lambda_sinkhorn = 5.0;
  double lambda_sobolev = 0.0;
  std::size_t hutchinson_probes = 1;

  // Modica-Mortola constants; present together or absent together.
  bool has_mm = false;
  double mm_epsilon = 0.0;
  double mm_gamma1 = 0.0;
  double mm_gamma2 = 0.0;
  double mm_lambda_energy = 1.0;  // lambda_E weighting of the energy term

  void validate() const;
};

struct SinkhornParams {
  double epsilon = 0.0;       // must be > 0 when a loss is evaluated
  std::size_t iterations = 200;
};

// Riemann action estimate: (1/N) sum_i sum_k dt_k * ||v(x_{t_{k-1}}, t_{k-1})||^alpha
// with the smoothed norm power. On-tape when the trajectory is.
Tensor action_estimate(const TrajectoryBatch& traj, const ActionConfig& cfg);

// Same quadrature with the raw (unsmoothed) norm power in plain doubles; the
// measurement path for scaling diagnostics, where the delta offset would bias
// exact ratios.
double raw_action(const TrajectoryBatch& traj, double alpha);

struct ConcentrationResult {
  double lhs = 0.0;  // sum u_k^alpha
  double rhs = 0.0;  // (sum u_k)^alpha
  bool holds = false;
};
// The discrete concentration inequality sum u^alpha >= (sum u)^alpha for
// alpha in (0,1); equality exactly on one-hot vectors.
ConcentrationResult concentration_check(const std::vector<double>& u, double alpha);

struct Lemma1Result {
  double lower = 0.0;   // M^(alpha-1) * sum rho ||v||^alpha
  double middle = 0.0;  // sum rho^alpha ||v||^alpha
  double upper = 0.0;   // m^(alpha-1) * sum rho ||v||^alpha
  bool holds = false;
};
// Bounded-density sandwich on discrete sums; weights must lie in [m, M].
Lemma1Result lemma1_bounds_check(const std::vector<double>& rho,
                                 const std::vector<double>& norms, double alpha,
                                 double m, double M);

// Hutchinson estimate of sum_k dt_k * E_i ||grad_x v||_F^2 along the
// trajectory: Rademacher probes through a central difference (h = 1e-4) of the
// field. States are treated as fixed samples (no gradient through the
// trajectory); parameters get gradient through the probe evaluations.
Tensor sobolev_penalty(const FieldFn& field, const TrajectoryBatch& traj,
                       std::size_t probes, Pcg64& rng);

struct LossBreakdown {
  Tensor total;            // scalar, on-tape when the field is
  double action = 0.0;
  double sinkhorn = 0.0;
  double sobolev = 0.0;
  double mm_energy = 0.0;
};

// Action + lambda_sinkhorn * S_eps(endpoints, target) [+ lambda_sobolev * penalty].
LossBreakdown total_loss(const FieldFn& field, const Tensor& x0, const Tensor& target,
                         const TimeGrid& grid, const ActionConfig& cfg,
                         const SinkhornParams& sp, Pcg64& probe_rng);

// eps^gamma1 * action + eps^gamma2 * sobolev (time-integrated energy).
Tensor mm_energy(const FieldFn& field, const TrajectoryBatch& traj,
                 const ActionConfig& cfg, Pcg64& rng);

// lambda_E * mm_energy + lambda_sinkhorn * S_eps(endpoints, target).
LossBreakdown mm_total_loss(const FieldFn& field, const Tensor& x0,
                            const Tensor& target, const TimeGrid& grid,
                            const ActionConfig& cfg, const SinkhornParams& sp,
                            Pcg64& probe_rng);

}  // namespace yflow
