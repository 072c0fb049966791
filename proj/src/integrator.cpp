#include "yflow/integrator.hpp"

#include <cmath>
#include <string>

namespace yflow {

namespace {

void validate_knots(const std::vector<double>& k, bool require_unit) {
  if (k.size() < 2) throw std::invalid_argument("time grid needs at least 2 knots");
  for (std::size_t i = 0; i + 1 < k.size(); ++i)
    if (!(k[i] < k[i + 1]))
      throw std::invalid_argument("time grid knots must be strictly increasing");
  if (require_unit) {
    if (std::fabs(k.front()) > 1e-12 || std::fabs(k.back() - 1.0) > 1e-12)
      throw std::invalid_argument("time grid must span [0, 1]");
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) sum += k[i + 1] - k[i];
    if (std::fabs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("time grid step sum deviates from 1");
  }
}

}  // namespace

TimeGrid TimeGrid::uniform(std::size_t K) {
  if (K < 1) throw std::invalid_argument("uniform grid: K must be >= 1");
  TimeGrid g;
  g.knots.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k)
    g.knots[k] = static_cast<double>(k) / static_cast<double>(K);
  return g;
}

TimeGrid TimeGrid::from_knots(std::vector<double> k, bool require_unit) {
  validate_knots(k, require_unit);
  TimeGrid g;
  g.knots = std::move(k);
  return g;
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "euler") return Scheme::Euler;
  if (s == "midpoint") return Scheme::Midpoint;
  if (s == "rk4") return Scheme::Rk4;
  throw config_error("unknown integration scheme '" + s +
                     "' (expected euler | midpoint | rk4)");
}

TrajectoryBatch integrate(const FieldFn& f, const Tensor& x0, const TimeGrid& grid,
                          Scheme scheme) {
  if (x0.rank() != 2) throw std::invalid_argument("integrate: x0 must be [N, d]");
  if (!all_finite(x0)) throw numeric_error("integrate: non-finite input batch");
  std::size_t K = grid.steps();
  TrajectoryBatch traj;
  traj.grid = grid;
  traj.states.reserve(K + 1);
  traj.velocities.reserve(K);
  traj.states.push_back(x0);

  for (std::size_t k = 0; k < K; ++k) {
    const Tensor& x = traj.states.back();
    double t = grid.knots[k];
    double dt = grid.dt(k);
    Tensor v_left = f(x, t);
    Tensor next;
    switch (scheme) {
      case Scheme::Euler:
        next = add(x, scale(v_left, dt));
        break;
      case Scheme::Midpoint: {
        Tensor xm = add(x, scale(v_left, 0.5 * dt));
        Tensor vm = f(xm, t + 0.5 * dt);
        next = add(x, scale(vm, dt));
        break;
      }
      case Scheme::Rk4: {
        const Tensor& k1 = v_left;
        Tensor k2 = f(add(x, scale(k1, 0.5 * dt)), t + 0.5 * dt);
        Tensor k3 = f(add(x, scale(k2, 0.5 * dt)), t + 0.5 * dt);
        Tensor k4 = f(add(x, scale(k3, dt)), grid.knots[k + 1]);
        Tensor incr = add(add(k1, scale(k2, 2.0)), add(scale(k3, 2.0), k4));
        next = add(x, scale(incr, dt / 6.0));
        break;
      }
    }
    if (!all_finite(v_left) || !all_finite(next))
      throw numeric_error("integrate: non-finite state at step k=" + std::to_string(k));
    traj.velocities.push_back(std::move(v_left));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

TrajectoryBatch integrate(const VelocityNet& net, const Tensor& x0, const TimeGrid& grid,
                          Scheme scheme, bool record_tape, Tape* tape,
                          std::vector<Tensor>* attached_out) {
  std::vector<Tensor> P;
  if (record_tape) {
    if (tape == nullptr)
      throw std::invalid_argument("integrate: record_tape requires a tape");
    P = net.attach(*tape);
  } else {
    P = net.params();
  }
  if (attached_out) *attached_out = P;
  FieldFn f = [&net, P](const Tensor& x, double t) { return net.eval(P, x, t); };
  return integrate(f, x0, grid, scheme);
}

FieldFn compress_schedule(FieldFn f, double s) {
  if (!(s > 0.0) || s > 1.0)
    throw std::invalid_argument("compress_schedule: s must lie in (0, 1], got " +
                                std::to_string(s));
  return [f = std::move(f), s](const Tensor& x, double t) {
    return scale(f(x, t / s), 1.0 / s);
  };
}

TimeGrid scale_grid(const TimeGrid& g, double s) {
  if (!(s > 0.0) || s > 1.0)
    throw std::invalid_argument("scale_grid: s must lie in (0, 1]");
  std::vector<double> knots = g.knots;
  for (double& t : knots) t *= s;
  return TimeGrid::from_knots(std::move(knots), /*require_unit=*/false);
}

}  // namespace yflow
