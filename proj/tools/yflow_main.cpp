#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "yflow/commands.hpp"
#include "yflow/tensor.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Y-shaped generative flows: train, sample, evaluate, export, compare"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, out_path, data_path, config_b;
  std::size_t n = 1024, steps = 10, metric_cap = 1024;
  std::uint64_t seed = 7;

  CLI::App* train = app.add_subcommand("train", "train a model per a config file");
  train->add_option("config", config_path, "config file")->required();

  CLI::App* sample = app.add_subcommand("sample", "integrate source draws to endpoints");
  sample->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  sample->add_option("--n", n, "number of samples");
  sample->add_option("--steps", steps, "Euler steps");
  sample->add_option("--seed", seed, "draw seed");
  sample->add_option("--out", out_path, "output CSV")->required();

  CLI::App* eval = app.add_subcommand("eval", "metrics against a held-out target batch");
  eval->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_path, "config whose dataset spec replaces the checkpoint's");
  eval->add_option("--n", n, "samples per side");
  eval->add_option("--steps", steps, "Euler steps");
  eval->add_option("--seed", seed, "draw seed");
  eval->add_option("--metric-cap", metric_cap, "max points fed to the metrics");
  eval->add_option("--out", out_path, "output JSON")->required();

  CLI::App* traj = app.add_subcommand("export-traj", "full trajectories as CSV");
  traj->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  traj->add_option("--n", n, "number of particles");
  traj->add_option("--steps", steps, "Euler steps");
  traj->add_option("--seed", seed, "draw seed");
  traj->add_option("--out", out_path, "output CSV")->required();

  CLI::App* compare = app.add_subcommand("compare", "paired run comparison report");
  compare->add_option("config-a", config_path, "first config")->required();
  compare->add_option("config-b", config_b, "second config")->required();
  compare->add_option("--out", out_path, "output JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) yflow::cmd_train(config_path);
    if (*sample) yflow::cmd_sample(ckpt_path, n, steps, seed, out_path);
    if (*eval) yflow::cmd_eval(ckpt_path, data_path, n, steps, seed, metric_cap, out_path);
    if (*traj) yflow::cmd_export_traj(ckpt_path, n, steps, seed, out_path);
    if (*compare) yflow::cmd_compare(config_path, config_b, out_path);
  } catch (const yflow::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const yflow::numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
