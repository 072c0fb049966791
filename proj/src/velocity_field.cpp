#include "yflow/velocity_field.hpp"

#include <cmath>

#include "yflow/rng.hpp"

namespace yflow {

void VelocityNetConfig::validate() const {
  if (dim < 1) throw config_error("velocity net: dim must be >= 1");
  if (hidden_layers < 1) throw config_error("velocity net: hidden_layers must be >= 1");
  if (time_embed_dim < 1) throw config_error("velocity net: time_embed_dim must be >= 1");
  if (hidden_width < 1) throw config_error("velocity net: hidden_width must be >= 1");
}

std::size_t VelocityNetConfig::param_count() const {
  std::size_t in = dim + time_embed_dim;
  std::size_t count = 0;
  if (time_embed_kind == TimeEmbedKind::LearnedLinear)
    count += time_embed_dim + time_embed_dim;  // 1 x te weights + te biases
  count += in * hidden_width + hidden_width;
  for (std::size_t l = 1; l < hidden_layers; ++l)
    count += hidden_width * hidden_width + hidden_width;
  count += hidden_width * dim + dim;
  return count;
}

VelocityNet::VelocityNet(VelocityNetConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  has_embed_params_ = cfg_.time_embed_kind == TimeEmbedKind::LearnedLinear;
  auto push = [&](const std::string& name, Shape shape) {
    names_.push_back(name);
    params_.push_back(Tensor::zeros(std::move(shape)));
  };
  if (has_embed_params_) {
    push("embed.w", {1, cfg_.time_embed_dim});
    push("embed.b", {cfg_.time_embed_dim});
  }
  std::size_t in = cfg_.dim + cfg_.time_embed_dim;
  for (std::size_t l = 0; l < cfg_.hidden_layers; ++l) {
    std::size_t fan_in = l == 0 ? in : cfg_.hidden_width;
    push("hidden" + std::to_string(l) + ".w", {fan_in, cfg_.hidden_width});
    push("hidden" + std::to_string(l) + ".b", {cfg_.hidden_width});
  }
  push("head.w", {cfg_.hidden_width, cfg_.dim});
  push("head.b", {cfg_.dim});
}

void VelocityNet::init(std::uint64_t seed) {
  Pcg64 rng(seed, streams::kInit);
  for (Tensor& p : params_) {
    if (p.rank() == 2) {
      double a = std::sqrt(6.0 / static_cast<double>(p.shape[0] + p.shape[1]));
      for (double& w : *p.data) w = rng.uniform(-a, a);
    } else {
      for (double& b : *p.data) b = 0.0;
    }
  }
}

std::vector<Tensor> VelocityNet::attach(Tape& tape) const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const Tensor& p : params_) out.push_back(tape.watch(p));
  return out;
}

Tensor VelocityNet::act(const Tensor& h) const {
  return cfg_.activation == Activation::Silu ? silu(h) : tanh_t(h);
}

Tensor VelocityNet::time_embed(const std::vector<Tensor>& P, double t) const {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("time_embed: t must lie in [0,1], got " +
                                std::to_string(t));
  if (cfg_.time_embed_kind == TimeEmbedKind::Sinusoidal) {
    std::vector<double> e(cfg_.time_embed_dim);
    constexpr double half_pi = 1.5707963267948966;
    for (std::size_t i = 0; i < e.size(); ++i) {
      double omega = static_cast<double>(i / 2 + 1) * half_pi;
      e[i] = i % 2 == 0 ? std::sin(omega * t) : std::cos(omega * t);
    }
    return Tensor::from({1, cfg_.time_embed_dim}, std::move(e));
  }
  Tensor tv = Tensor::from({1, 1}, {t});
  return act(add_rowvec(matmul(tv, P[0]), P[1]));
}

Tensor VelocityNet::time_embed_multi(const std::vector<Tensor>& P,
                                     const std::vector<double>& times) const {
  for (double t : times)
    if (!(t >= 0.0 && t <= 1.0))
      throw std::invalid_argument("time_embed: t must lie in [0,1], got " +
                                  std::to_string(t));
  const std::size_t n = times.size();
  if (cfg_.time_embed_kind == TimeEmbedKind::Sinusoidal) {
    std::vector<double> e(n * cfg_.time_embed_dim);
    constexpr double half_pi = 1.5707963267948966;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t i = 0; i < cfg_.time_embed_dim; ++i) {
        double omega = static_cast<double>(i / 2 + 1) * half_pi;
        e[r * cfg_.time_embed_dim + i] =
            i % 2 == 0 ? std::sin(omega * times[r]) : std::cos(omega * times[r]);
      }
    return Tensor::from({n, cfg_.time_embed_dim}, std::move(e));
  }
  Tensor tv = Tensor::from({n, 1}, times);
  return act(add_rowvec(matmul(tv, P[0]), P[1]));
}

Tensor VelocityNet::eval_multi(const std::vector<Tensor>& P, const Tensor& x,
                               const std::vector<double>& times) const {
  if (P.size() != params_.size())
    throw std::invalid_argument("eval: wrong parameter bundle size");
  if (x.rank() != 2 || x.shape[1] != cfg_.dim)
    throw std::invalid_argument("eval: x must be [N, " + std::to_string(cfg_.dim) +
                                "], got " + shape_str(x.shape));
  if (times.size() != x.shape[0])
    throw std::invalid_argument("eval: need one time per row");
  Tensor h = concat_cols(x, time_embed_multi(P, times));
  std::size_t base = has_embed_params_ ? 2 : 0;
  for (std::size_t l = 0; l < cfg_.hidden_layers; ++l)
    h = act(add_rowvec(matmul(h, P[base + 2 * l]), P[base + 2 * l + 1]));
  std::size_t head = base + 2 * cfg_.hidden_layers;
  return add_rowvec(matmul(h, P[head]), P[head + 1]);
}

Tensor VelocityNet::eval(const std::vector<Tensor>& P, const Tensor& x, double t) const {
  if (P.size() != params_.size())
    throw std::invalid_argument("eval: wrong parameter bundle size");
  if (x.rank() != 2 || x.shape[1] != cfg_.dim)
    throw std::invalid_argument("eval: x must be [N, " + std::to_string(cfg_.dim) +
                                "], got " + shape_str(x.shape));
  std::size_t n = x.shape[0];
  Tensor e = time_embed(P, t);
  Tensor h = concat_cols(x, tile_rows(e, n));
  std::size_t base = has_embed_params_ ? 2 : 0;
  for (std::size_t l = 0; l < cfg_.hidden_layers; ++l)
    h = act(add_rowvec(matmul(h, P[base + 2 * l]), P[base + 2 * l + 1]));
  std::size_t head = base + 2 * cfg_.hidden_layers;
  return add_rowvec(matmul(h, P[head]), P[head + 1]);
}

}  // namespace yflow
