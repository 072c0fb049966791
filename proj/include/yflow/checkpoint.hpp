#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "yflow/config.hpp"
#include "yflow/tensor.hpp"
#include "yflow/velocity_field.hpp"

namespace yflow {

struct LossStats {
  std::uint64_t rows = 0;  // logged iterations
  double last_total = 0.0;
  double last_action = 0.0;
  double last_sinkhorn = 0.0;
  double last_sobolev = 0.0;
  double best_total = 0.0;
};

// Binary training snapshot: magic, format version, verbatim config echo,
// iteration counter, shape-prefixed little-endian parameter tensors, running
// loss statistics. load(save(c)) round-trips bitwise.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::string config_text;
  std::uint64_t iteration = 0;
  std::vector<Tensor> params;
  LossStats stats;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the run configuration and the network whose parameters the
// checkpoint stores; shape mismatches against the echoed config are rejected.
std::pair<RunConfig, VelocityNet> net_from_checkpoint(const Checkpoint& ckpt);

}  // namespace yflow
