#include "yflow/flow_matching.hpp"

#include <numeric>
#include <stdexcept>

#include "yflow/ot.hpp"

namespace yflow {

BridgeSample bridge_sample(std::vector<double> x0, std::vector<double> x1, double t,
                           double sigma, Pcg64& rng) {
  if (x0.size() != x1.size())
    throw std::invalid_argument("bridge_sample: dimension mismatch");
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("bridge_sample: t must lie in [0,1]");
  if (sigma < 0.0) throw std::invalid_argument("bridge_sample: sigma must be >= 0");
  BridgeSample b;
  b.t = t;
  b.sigma = sigma;
  b.xt.resize(x0.size());
  b.u.resize(x0.size());
  if (sigma > 0.0) {
    b.z.resize(x0.size());
    for (double& e : b.z) e = rng.gaussian();
  }
  for (std::size_t j = 0; j < x0.size(); ++j) {
    b.xt[j] = (1.0 - t) * x0[j] + t * x1[j];
    if (sigma > 0.0) b.xt[j] += sigma * b.z[j];
    b.u[j] = x1[j] - x0[j];
  }
  b.x0 = std::move(x0);
  b.x1 = std::move(x1);
  return b;
}

CouplingMode coupling_from_string(const std::string& s) {
  if (s == "independent") return CouplingMode::Independent;
  if (s == "ot") return CouplingMode::Ot;
  throw config_error("unknown coupling mode '" + s + "' (expected independent or ot)");
}

PairBatch make_pairs(const Tensor& X0, const Tensor& X1, CouplingMode mode, Pcg64& rng) {
  if (X0.rank() != 2 || X1.rank() != 2 || X0.shape != X1.shape)
    throw std::invalid_argument("make_pairs: batches must be [n, d] with equal shapes");
  const std::size_t n = X0.rows(), d = X0.cols();
  std::vector<std::size_t> sigma(n);
  if (mode == CouplingMode::Ot) {
    sigma = minibatch_ot_coupling(X0, X1);
  } else {
    std::iota(sigma.begin(), sigma.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.bounded(i);
      std::swap(sigma[i - 1], sigma[j]);
    }
  }
  std::vector<double> x1(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x1[i * d + j] = X1.at(sigma[i] * d + j);
  PairBatch out;
  out.x0 = X0;
  out.x1 = Tensor::from({n, d}, std::move(x1));
  return out;
}

Tensor cfm_loss_at(const MultiField& field, const PairBatch& pairs, double sigma,
                   const std::vector<double>& times, Pcg64& rng) {
  const std::size_t n = pairs.size(), d = pairs.dim();
  if (n == 0) throw std::invalid_argument("cfm_loss: empty pair batch");
  if (times.size() != n) throw std::invalid_argument("cfm_loss: need one time per pair");
  if (!all_finite(pairs.x0) || !all_finite(pairs.x1))
    throw numeric_error("cfm_loss: non-finite pair batch");
  std::vector<double> xt(n * d), u(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r0(d), r1(d);
    for (std::size_t j = 0; j < d; ++j) {
      r0[j] = pairs.x0.at(i * d + j);
      r1[j] = pairs.x1.at(i * d + j);
    }
    BridgeSample b = bridge_sample(std::move(r0), std::move(r1), times[i], sigma, rng);
    for (std::size_t j = 0; j < d; ++j) {
      xt[i * d + j] = b.xt[j];
      u[i * d + j] = b.u[j];
    }
  }
  Tensor v = field(Tensor::from({n, d}, std::move(xt)), times);
  Tensor res = sub(v, Tensor::from({n, d}, std::move(u)));
  return scale(sum(square(res)), 1.0 / static_cast<double>(n));
}

Tensor cfm_loss(const MultiField& field, const PairBatch& pairs, double sigma, Pcg64& rng) {
  std::vector<double> times(pairs.size());
  for (double& t : times) t = rng.uniform();
  return cfm_loss_at(field, pairs, sigma, times, rng);
}

}  // namespace yflow
