#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "yflow/checkpoint.hpp"
#include "yflow/config.hpp"
#include "yflow/tensor.hpp"
#include "yflow/velocity_field.hpp"

namespace yflow {

// Adam with bias correction; epsilon fixed at 1e-8. Parameters with no
// gradient this step are treated as zero-gradient (moments still decay).
// When grad_clip > 0 the gradient bundle is rescaled to that global norm
// before the moment updates.
class Adam {
 public:
  explicit Adam(const OptimizerConfig& oc) : oc_(oc) {}

  void step(std::vector<Tensor>& master, const std::vector<Tensor>& taped,
            const std::unordered_map<int, Tensor>& grads);

  std::uint64_t steps_taken() const { return t_; }

 private:
  OptimizerConfig oc_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct LossRow {
  std::uint64_t iteration = 0;
  double total = 0.0;
  double action = 0.0;
  double sinkhorn = 0.0;
  double sobolev = 0.0;
};

struct TrainResult {
  VelocityNet net;
  std::vector<LossRow> rows;
  double resolved_epsilon = 0.0;
  LossStats stats;
  Checkpoint final_checkpoint;
};

using CheckpointSink = std::function<void(const Checkpoint&)>;

// Source/target batch provider resolved from the dataset spec: branch-mixture
// samplers or csv pools with deterministic index draws.
class BatchProvider {
 public:
  BatchProvider(const DatasetSpec& spec, std::uint64_t seed);
  std::size_t dim() const { return d_; }
  Tensor draw(Side side, std::size_t n);

 private:
  DatasetSpec spec_;
  std::size_t d_ = 0;
  // mixture path
  std::vector<MixtureSampler> samplers_;
  // csv path
  Tensor pool_src_, pool_tgt_;
  Pcg64 idx_rng_;
};

// Full deterministic training loop for every method. Periodic checkpoints are
// handed to `sink` (may be null); the final checkpoint is returned. Non-finite
// losses abort with a numeric_error naming the iteration.
TrainResult train_run(const RunConfig& cfg, const CheckpointSink& sink = nullptr);

// The entropic temperature actually used for training/eval: the configured
// value if positive, otherwise 0.05 * mean squared distance between a source
// and a target probe batch.
double resolve_epsilon(const RunConfig& cfg, BatchProvider& data);

}  // namespace yflow
