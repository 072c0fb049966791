#pragma once

#include <cstdint>
#include <string>

namespace yflow {

// CLI subcommand bodies. All throw config_error for bad inputs and
// numeric_error for numeric failures; the CLI maps those to exit codes 2/3.
// Every output is bitwise deterministic given the arguments.

// Train per the config file: writes into its output directory the verbatim
// config (config.txt), the loss curve (loss.csv), periodic checkpoints
// (checkpoint_<iter>.bin), the final checkpoint (checkpoint.bin), and a run
// summary (run.json).
void cmd_train(const std::string& config_path);

// Draw n source points with `seed`, integrate K'=steps Euler steps through
// the checkpointed field, write the endpoints as CSV (header x1..xd).
void cmd_sample(const std::string& ckpt_path, std::size_t n, std::size_t steps,
                std::uint64_t seed, const std::string& out_path);

// Sample the model as cmd_sample does, draw a held-out target batch, and
// write metrics JSON {w1, w2, mmd, sinkhorn} plus every constant that went
// into them. `data_config_path` optionally overrides the dataset ("" keeps
// the checkpoint's); metric_cap bounds the points fed to the O(n^3)/O(n^2)
// metrics.
void cmd_eval(const std::string& ckpt_path, const std::string& data_config_path,
              std::size_t n, std::size_t steps, std::uint64_t seed,
              std::size_t metric_cap, const std::string& out_path);

// Full trajectories as CSV rows (particle-id, k, t_k, x1..xd, vnorm),
// n*(steps+1) rows in lexicographic (particle-id, k) order.
void cmd_export_traj(const std::string& ckpt_path, std::size_t n, std::size_t steps,
                     std::uint64_t seed, const std::string& out_path);

// Train both configs (which must share dataset, seeds, architecture and
// grid), roll matched source draws through both fields, and write a
// comparison JSON: trunk statistics at t=0.2/0.3, per-step displacement
// profiles, path lengths, endpoint W1.
void cmd_compare(const std::string& config_a, const std::string& config_b,
                 const std::string& out_path);

}  // namespace yflow
