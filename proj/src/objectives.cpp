#include "yflow/objectives.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "yflow/ot.hpp"

namespace yflow {

void ActionConfig::validate() const {
  if (!(alpha > 0.0) || alpha > 2.0)
    throw config_error("alpha must lie in (0, 2], got " + std::to_string(alpha));
  if (!(delta > 0.0))
    throw config_error("delta must be positive, got " + std::to_string(delta));
  if (lambda_sinkhorn < 0.0)
    throw config_error("lambda_sinkhorn must be >= 0");
  if (lambda_sobolev < 0.0)
    throw config_error("lambda_sobolev must be >= 0");
  if (hutchinson_probes == 0)
    throw config_error("hutchinson_probes must be a positive integer");
  if (has_mm) {
    if (!(mm_epsilon > 0.0))
      throw config_error("mm_epsilon must be positive when the interface energy is enabled");
    if (mm_lambda_energy < 0.0)
      throw config_error("mm_lambda_energy must be >= 0");
  }
}

Tensor action_estimate(const TrajectoryBatch& traj, const ActionConfig& cfg) {
  if (traj.velocities.empty())
    throw std::invalid_argument("action_estimate: empty trajectory");
  const std::size_t n = traj.velocities[0].rows();
  Tensor total;
  bool first = true;
  for (std::size_t k = 0; k < traj.velocities.size(); ++k) {
    const double dt = traj.grid.knots[k + 1] - traj.grid.knots[k];
    Tensor p = smooth_norm_power(traj.velocities[k], cfg.alpha, cfg.delta);
    Tensor step = scale(sum(p), dt);
    total = first ? step : add(total, step);
    first = false;
  }
  return scale(total, 1.0 / static_cast<double>(n));
}

double raw_action(const TrajectoryBatch& traj, double alpha) {
  if (traj.velocities.empty())
    throw std::invalid_argument("raw_action: empty trajectory");
  const std::size_t n = traj.velocities[0].rows();
  const std::size_t d = traj.velocities[0].cols();
  double total = 0.0;
  for (std::size_t k = 0; k < traj.velocities.size(); ++k) {
    const double dt = traj.grid.knots[k + 1] - traj.grid.knots[k];
    const auto& v = traj.velocities[k].vals();
    double step = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double x = v[i * d + j];
        s += x * x;
      }
      step += std::pow(s, 0.5 * alpha);
    }
    total += dt * step;
  }
  return total / static_cast<double>(n);
}

ConcentrationResult concentration_check(const std::vector<double>& u, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("concentration_check: alpha must lie in (0, 1)");
  if (u.empty())
    throw std::invalid_argument("concentration_check: empty vector");
  ConcentrationResult r;
  double mass = 0.0;
  for (double x : u) {
    if (x < 0.0)
      throw std::invalid_argument("concentration_check: entries must be nonnegative");
    r.lhs += std::pow(x, alpha);
    mass += x;
  }
  r.rhs = std::pow(mass, alpha);
  r.holds = r.lhs >= r.rhs - 1e-12;
  return r;
}

Lemma1Result lemma1_bounds_check(const std::vector<double>& rho,
                                 const std::vector<double>& norms, double alpha,
                                 double m, double M) {
  if (rho.size() != norms.size())
    throw std::invalid_argument("lemma1_bounds_check: size mismatch");
  if (rho.empty()) throw std::invalid_argument("lemma1_bounds_check: empty input");
  if (!(m > 0.0) || !(M >= m))
    throw std::invalid_argument("lemma1_bounds_check: need 0 < m <= M");
  double weighted = 0.0;  // sum rho ||v||^alpha
  Lemma1Result r;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] < m || rho[i] > M)
      throw std::invalid_argument("lemma1_bounds_check: weight " + std::to_string(rho[i]) +
                                  " outside [" + std::to_string(m) + ", " + std::to_string(M) + "]");
    if (norms[i] < 0.0)
      throw std::invalid_argument("lemma1_bounds_check: negative norm");
    const double na = std::pow(norms[i], alpha);
    weighted += rho[i] * na;
    r.middle += std::pow(rho[i], alpha) * na;
  }
  r.lower = std::pow(M, alpha - 1.0) * weighted;
  r.upper = std::pow(m, alpha - 1.0) * weighted;
  r.holds = (r.lower <= r.middle + 1e-12) && (r.middle <= r.upper + 1e-12);
  return r;
}

Tensor sobolev_penalty(const FieldFn& field, const TrajectoryBatch& traj,
                       std::size_t probes, Pcg64& rng) {
  if (probes == 0)
    throw std::invalid_argument("sobolev_penalty: probes must be positive");
  if (traj.velocities.empty())
    throw std::invalid_argument("sobolev_penalty: empty trajectory");
  const double h = 1e-4;
  const std::size_t steps = traj.velocities.size();
  Tensor total;
  bool first = true;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = traj.grid.knots[k];
    const double dt = traj.grid.knots[k + 1] - traj.grid.knots[k];
    // Sample points are fixed inputs here: the penalty differentiates the
    // field, not the trajectory that produced the states.
    const Tensor xk = traj.states[k].detached();
    const std::size_t n = xk.rows(), d = xk.cols();
    for (std::size_t p = 0; p < probes; ++p) {
      std::vector<double> probe(n * d);
      for (double& e : probe) e = (rng.next() >> 63) ? 1.0 : -1.0;
      std::vector<double> xp(n * d), xm(n * d);
      for (std::size_t i = 0; i < n * d; ++i) {
        xp[i] = xk.vals()[i] + h * probe[i];
        xm[i] = xk.vals()[i] - h * probe[i];
      }
      Tensor vp = field(Tensor::from({n, d}, xp), t);
      Tensor vm = field(Tensor::from({n, d}, xm), t);
      Tensor diff = scale(sub(vp, vm), 1.0 / (2.0 * h));
      Tensor q = sum(square(diff));  // sum_i ||J_i r_i||^2 for this probe
      Tensor contrib = scale(q, dt / (static_cast<double>(n) * static_cast<double>(probes)));
      total = first ? contrib : add(total, contrib);
      first = false;
    }
  }
  return total;
}

LossBreakdown total_loss(const FieldFn& field, const Tensor& x0, const Tensor& target,
                         const TimeGrid& grid, const ActionConfig& cfg,
                         const SinkhornParams& sp, Pcg64& probe_rng) {
  cfg.validate();
  if (!(sp.epsilon > 0.0))
    throw config_error("sinkhorn epsilon must be resolved to a positive value");
  TrajectoryBatch traj = integrate(field, x0, grid, Scheme::Euler);
  LossBreakdown out;
  Tensor act = action_estimate(traj, cfg);
  out.action = act.value();
  out.total = act;
  if (cfg.lambda_sinkhorn > 0.0) {
    Tensor S = sinkhorn_divergence(traj.states.back(), target, sp.epsilon, sp.iterations);
    out.sinkhorn = S.value();
    out.total = add(out.total, scale(S, cfg.lambda_sinkhorn));
  }
  if (cfg.lambda_sobolev > 0.0) {
    Tensor pen = sobolev_penalty(field, traj, cfg.hutchinson_probes, probe_rng);
    out.sobolev = pen.value();
    out.total = add(out.total, scale(pen, cfg.lambda_sobolev));
  }
  return out;
}

Tensor mm_energy(const FieldFn& field, const TrajectoryBatch& traj,
                 const ActionConfig& cfg, Pcg64& rng) {
  cfg.validate();
  if (!cfg.has_mm)
    throw config_error("mm_energy requires the interface-energy constants to be set");
  Tensor act = action_estimate(traj, cfg);
  Tensor pen = sobolev_penalty(field, traj, cfg.hutchinson_probes, rng);
  const double w1 = std::pow(cfg.mm_epsilon, cfg.mm_gamma1);
  const double w2 = std::pow(cfg.mm_epsilon, cfg.mm_gamma2);
  return add(scale(act, w1), scale(pen, w2));
}

LossBreakdown mm_total_loss(const FieldFn& field, const Tensor& x0,
                            const Tensor& target, const TimeGrid& grid,
                            const ActionConfig& cfg, const SinkhornParams& sp,
                            Pcg64& probe_rng) {
  cfg.validate();
  if (!cfg.has_mm)
    throw config_error("mm_total_loss requires the interface-energy constants to be set");
  if (!(sp.epsilon > 0.0))
    throw config_error("sinkhorn epsilon must be resolved to a positive value");
  TrajectoryBatch traj = integrate(field, x0, grid, Scheme::Euler);
  LossBreakdown out;
  Tensor act = action_estimate(traj, cfg);
  Tensor pen = sobolev_penalty(field, traj, cfg.hutchinson_probes, probe_rng);
  out.action = act.value();
  out.sobolev = pen.value();
  const double w1 = std::pow(cfg.mm_epsilon, cfg.mm_gamma1);
  const double w2 = std::pow(cfg.mm_epsilon, cfg.mm_gamma2);
  Tensor energy = add(scale(act, w1), scale(pen, w2));
  out.mm_energy = energy.value();
  Tensor total = scale(energy, cfg.mm_lambda_energy);
  if (cfg.lambda_sinkhorn > 0.0) {
    Tensor S = sinkhorn_divergence(traj.states.back(), target, sp.epsilon, sp.iterations);
    out.sinkhorn = S.value();
    total = add(total, scale(S, cfg.lambda_sinkhorn));
  }
  out.total = total;
  return out;
}

}  // namespace yflow
