#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "yflow/datasets.hpp"
#include "yflow/objectives.hpp"
#include "yflow/velocity_field.hpp"

namespace yflow {

// Flat dotted-key config text: one `key = value` per line, `#` lines are
// comments. Unknown and duplicate keys are hard errors.
class KvConfig {
 public:
  static KvConfig parse(const std::string& text);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::string get_str(const std::string& key, const std::string& fallback);
  std::string require_str(const std::string& key);
  double get_double(const std::string& key, double fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Throws listing every key that was never consumed by a getter.
  void reject_unknown() const;

 private:
  std::map<std::string, std::string> entries_;
  std::set<std::string> consumed_;
};

enum class Method { Yflow, YflowSobolev, YflowMm, Fm, Cfm, OtCfm };

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);

struct OptimizerConfig {
  double lr = 1e-3;
  std::size_t batch_size = 256;
  std::size_t iterations = 10000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t checkpoint_every = 2500;  // 0 disables periodic checkpoints
  double grad_clip = 0.0;               // global-norm threshold; 0 disables
};

struct RunConfig {
  Method method = Method::Yflow;
  DatasetSpec data;
  VelocityNetConfig net;  // dim resolved from the dataset at run time
  ActionConfig action;
  std::size_t grid_steps = 10;
  OptimizerConfig opt;
  SinkhornParams sinkhorn;  // epsilon <= 0 resolves to 0.05 * mean cost
  double fm_sigma = 0.0;    // bridge noise for the cfm baseline
  std::uint64_t seed_init = 42;
  std::uint64_t seed_data = 42;
  std::uint64_t seed_train = 42;
  std::string output_dir = "runs/out";
  std::string config_text;  // verbatim source, echoed into outputs

  static RunConfig from_text(const std::string& text);
  static RunConfig from_file(const std::string& path);

  bool is_baseline() const {
    return method == Method::Fm || method == Method::Cfm || method == Method::OtCfm;
  }
  void validate() const;
};

}  // namespace yflow
