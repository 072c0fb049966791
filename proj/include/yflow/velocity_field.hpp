#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "yflow/tensor.hpp"

namespace yflow {

enum class Activation { Silu, Tanh };
enum class TimeEmbedKind { LearnedLinear, Sinusoidal };

struct VelocityNetConfig {
  std::size_t dim = 2;
  std::size_t hidden_width = 256;
  std::size_t hidden_layers = 3;
  Activation activation = Activation::Silu;
  std::size_t time_embed_dim = 64;
  TimeEmbedKind time_embed_kind = TimeEmbedKind::LearnedLinear;

  void validate() const;
  // Total parameter count, derivable from the config alone.
  std::size_t param_count() const;
};

// v_theta(x, t): concat(x, time embedding) -> hidden SiLU/Tanh stack -> linear
// head of width d. Parameters are plain (untaped) tensors; attach() produces
// taped views for a training step.
class VelocityNet {
 public:
  explicit VelocityNet(VelocityNetConfig cfg);

  // Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases,
  // deterministic in the seed.
  void init(std::uint64_t seed);

  const VelocityNetConfig& config() const { return cfg_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }

  // Registers every parameter as a leaf on `tape`; result is aligned with
  // params() and shares storage with it.
  std::vector<Tensor> attach(Tape& tape) const;

  // Time embedding at scalar t in [0,1]: [1, time_embed_dim]. Learned-linear
  // runs activation(W t + b); sinusoidal returns fixed Fourier features
  // (sin/cos pairs, frequencies (j+1)*pi/2) and uses no parameters.
  Tensor time_embed(const std::vector<Tensor>& P, double t) const;
  Tensor time_embed(double t) const { return time_embed(params_, t); }

  // v(x, t) for a batch x [N, d] -> [N, d]. Rows are independent.
  Tensor eval(const std::vector<Tensor>& P, const Tensor& x, double t) const;
  Tensor eval(const Tensor& x, double t) const { return eval(params_, x, t); }

  // Per-row times (the flow-matching regression path): row i is evaluated at
  // times[i]; matches eval() on that single row bitwise.
  Tensor time_embed_multi(const std::vector<Tensor>& P, const std::vector<double>& times) const;
  Tensor eval_multi(const std::vector<Tensor>& P, const Tensor& x,
                    const std::vector<double>& times) const;
  Tensor eval_multi(const Tensor& x, const std::vector<double>& times) const {
    return eval_multi(params_, x, times);
  }

 private:
  Tensor act(const Tensor& h) const;

  VelocityNetConfig cfg_;
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
  bool has_embed_params_ = false;
};

}  // namespace yflow
