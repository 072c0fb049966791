#include "yflow/commands.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "yflow/checkpoint.hpp"
#include "yflow/config.hpp"
#include "yflow/integrator.hpp"
#include "yflow/ot.hpp"
#include "yflow/trainer.hpp"

namespace yflow {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw config_error("cannot write '" + path + "'");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw config_error("short write to '" + path + "'");
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Checkpoint -> (config, net, trajectories) plumbing shared by the read-side
// commands.
struct LoadedRun {
  RunConfig cfg;
  VelocityNet net;
};

LoadedRun load_run(const std::string& ckpt_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  auto [cfg, net] = net_from_checkpoint(ckpt);
  return LoadedRun{std::move(cfg), std::move(net)};
}

TrajectoryBatch rollout(const VelocityNet& net, const Tensor& x0, std::size_t steps) {
  return integrate(net, x0, TimeGrid::uniform(steps), Scheme::Euler,
                   /*record_tape=*/false);
}

std::vector<std::string> coord_header(std::size_t d) {
  std::vector<std::string> h;
  h.reserve(d);
  for (std::size_t j = 0; j < d; ++j) h.push_back("x" + std::to_string(j + 1));
  return h;
}

// Mean pairwise inter-particle distance of one [n, d] slice.
double mean_pairwise_distance(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = x.at(i * d + c) - x.at(j * d + c);
        s2 += diff * diff;
      }
      sum += std::sqrt(s2);
    }
  return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

std::size_t nearest_knot(const TimeGrid& grid, double t) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.knots.size(); ++k)
    if (std::abs(grid.knots[k] - t) < std::abs(grid.knots[best] - t)) best = k;
  return best;
}

// profile[k] = mean over particles of ||x_{k+1} - x_k||.
std::vector<double> displacement_profile(const TrajectoryBatch& traj) {
  const std::size_t n = traj.particles(), d = traj.dim();
  std::vector<double> profile;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const Tensor& a = traj.states[k];
    const Tensor& b = traj.states[k + 1];
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = b.at(i * d + c) - a.at(i * d + c);
        s2 += diff * diff;
      }
      mean += std::sqrt(s2);
    }
    profile.push_back(mean / static_cast<double>(n));
  }
  return profile;
}

}  // namespace

void cmd_train(const std::string& config_path) {
  RunConfig cfg = RunConfig::from_file(config_path);
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  write_text((dir / "config.txt").string(), cfg.config_text);

  CheckpointSink sink = [&dir](const Checkpoint& c) {
    save_checkpoint((dir / ("checkpoint_" + std::to_string(c.iteration) + ".bin")).string(),
                    c);
  };
  TrainResult res = train_run(cfg, sink);

  std::string csv = "iteration,total,action,sinkhorn,sobolev\n";
  for (const LossRow& row : res.rows)
    csv += std::to_string(row.iteration) + "," + fmt(row.total) + "," + fmt(row.action) +
           "," + fmt(row.sinkhorn) + "," + fmt(row.sobolev) + "\n";
  write_text((dir / "loss.csv").string(), csv);

  save_checkpoint((dir / "checkpoint.bin").string(), res.final_checkpoint);

  json j;
  j["method"] = method_to_string(cfg.method);
  j["dim"] = res.net.config().dim;
  j["grid_steps"] = cfg.grid_steps;
  j["iterations"] = cfg.opt.iterations;
  j["resolved_epsilon"] = res.resolved_epsilon;
  j["sinkhorn_iterations"] = cfg.sinkhorn.iterations;
  j["grad_clip"] = cfg.opt.grad_clip;
  j["seed_init"] = cfg.seed_init;
  j["seed_data"] = cfg.seed_data;
  j["seed_train"] = cfg.seed_train;
  j["last_total"] = res.stats.last_total;
  j["best_total"] = res.stats.best_total;
  write_text((dir / "run.json").string(), j.dump(2) + "\n");
}

void cmd_sample(const std::string& ckpt_path, std::size_t n, std::size_t steps,
                std::uint64_t seed, const std::string& out_path) {
  if (steps < 1) throw config_error("sample: steps must be >= 1");
  LoadedRun run = load_run(ckpt_path);
  const std::size_t d = run.net.config().dim;
  if (n == 0) {
    // header-only CSV
    std::string header;
    for (std::size_t j = 0; j < d; ++j) header += (j ? "," : "") + ("x" + std::to_string(j + 1));
    write_text(out_path, header + "\n");
    return;
  }
  BatchProvider data(run.cfg.data, seed);
  Tensor x0 = data.draw(Side::Source, n);
  TrajectoryBatch traj = rollout(run.net, x0, steps);
  const fs::path p(out_path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  save_csv(out_path, traj.states.back(), coord_header(d));
}

void cmd_eval(const std::string& ckpt_path, const std::string& data_config_path,
              std::size_t n, std::size_t steps, std::uint64_t seed,
              std::size_t metric_cap, const std::string& out_path) {
  if (steps < 1) throw config_error("eval: steps must be >= 1");
  if (n < 2) throw config_error("eval: need at least 2 samples");
  if (metric_cap < 2) throw config_error("eval: metric-cap must be >= 2");
  LoadedRun run = load_run(ckpt_path);
  if (!data_config_path.empty()) {
    RunConfig override_cfg = RunConfig::from_file(data_config_path);
    run.cfg.data = override_cfg.data;
    if (run.cfg.data.kind == DatasetKind::BranchMixture &&
        run.cfg.data.d != run.net.config().dim)
      throw config_error("eval: dataset dimension " + std::to_string(run.cfg.data.d) +
                         " does not match the checkpointed network dimension " +
                         std::to_string(run.net.config().dim));
  }
  BatchProvider data(run.cfg.data, seed);
  if (data.dim() != run.net.config().dim)
    throw config_error("eval: dataset dimension " + std::to_string(data.dim()) +
                       " does not match the checkpointed network dimension " +
                       std::to_string(run.net.config().dim));
  Tensor x0 = data.draw(Side::Source, n);
  Tensor target = data.draw(Side::Target, n);
  TrajectoryBatch traj = rollout(run.net, x0, steps);

  // Metric inputs are capped: the assignment solver is O(n^3).
  Tensor X = subsample_rows(traj.states.back(), metric_cap, seed);
  Tensor Y = subsample_rows(target, metric_cap, seed + 1);
  const double eps = resolve_epsilon(run.cfg, data);

  json j;
  j["w1"] = exact_wasserstein(X, Y, 1);
  j["w2"] = exact_wasserstein(X, Y, 2);
  j["mmd"] = rbf_mmd(X, Y);
  j["mmd_bandwidth"] = "median-pairwise";
  j["sinkhorn"] = sinkhorn_divergence(X, Y, eps, run.cfg.sinkhorn.iterations).value();
  j["sinkhorn_epsilon"] = eps;
  j["sinkhorn_iterations"] = run.cfg.sinkhorn.iterations;
  j["n"] = n;
  j["metric_cap"] = metric_cap;
  j["points_used"] = X.rows();
  j["seed"] = seed;
  j["steps"] = steps;
  write_text(out_path, j.dump(2) + "\n");
}

void cmd_export_traj(const std::string& ckpt_path, std::size_t n, std::size_t steps,
                     std::uint64_t seed, const std::string& out_path) {
  if (steps < 1) throw config_error("export-traj: steps must be >= 1");
  LoadedRun run = load_run(ckpt_path);
  const std::size_t d = run.net.config().dim;

  std::string csv = "particle-id,k,t_k";
  for (std::size_t j = 0; j < d; ++j) csv += ",x" + std::to_string(j + 1);
  csv += ",vnorm\n";

  if (n > 0) {
    BatchProvider data(run.cfg.data, seed);
    Tensor x0 = data.draw(Side::Source, n);
    TrajectoryBatch traj = rollout(run.net, x0, steps);
    // The stored velocities cover knots 0..K-1; the terminal knot needs one
    // extra field evaluation at t = 1.
    Tensor v_end =
        run.net.eval(run.net.params(), traj.states.back(), traj.grid.knots.back());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k <= steps; ++k) {
        const Tensor& x = traj.states[k];
        const Tensor& v = k < steps ? traj.velocities[k] : v_end;
        double vn = 0.0;
        for (std::size_t c = 0; c < d; ++c) vn += v.at(i * d + c) * v.at(i * d + c);
        csv += std::to_string(i) + "," + std::to_string(k) + "," + fmt(traj.grid.knots[k]);
        for (std::size_t c = 0; c < d; ++c) csv += "," + fmt(x.at(i * d + c));
        csv += "," + fmt(std::sqrt(vn)) + "\n";
      }
    }
  }
  write_text(out_path, csv);
}

void cmd_compare(const std::string& config_a, const std::string& config_b,
                 const std::string& out_path) {
  RunConfig a = RunConfig::from_file(config_a);
  RunConfig b = RunConfig::from_file(config_b);

  // The comparison is only meaningful on a shared task: same data, same
  // draws, same architecture, same grid. The objective may differ.
  std::string diffs;
  auto differs = [&diffs](const std::string& what) { diffs += (diffs.empty() ? "" : ", ") + what; };
  if (a.data.kind != b.data.kind || a.data.d != b.data.d ||
      a.data.n_branches != b.data.n_branches ||
      a.data.samples_per_side != b.data.samples_per_side ||
      a.data.cluster_std != b.data.cluster_std ||
      a.data.source_center != b.data.source_center || a.data.target_y != b.data.target_y ||
      a.data.target_x_min != b.data.target_x_min ||
      a.data.target_x_max != b.data.target_x_max || a.data.csv_source != b.data.csv_source ||
      a.data.csv_target != b.data.csv_target)
    differs("dataset");
  if (a.seed_init != b.seed_init || a.seed_data != b.seed_data ||
      a.seed_train != b.seed_train)
    differs("seeds");
  if (a.net.hidden_width != b.net.hidden_width || a.net.hidden_layers != b.net.hidden_layers ||
      a.net.activation != b.net.activation || a.net.time_embed_dim != b.net.time_embed_dim ||
      a.net.time_embed_kind != b.net.time_embed_kind)
    differs("architecture");
  if (a.grid_steps != b.grid_steps) differs("grid");
  if (!diffs.empty())
    throw config_error("compare: configs must share " + diffs);

  TrainResult ra = train_run(a);
  TrainResult rb = train_run(b);

  constexpr std::size_t kCompareN = 512;
  BatchProvider data(a.data, a.seed_data);
  Tensor x0 = data.draw(Side::Source, kCompareN);
  Tensor target = data.draw(Side::Target, kCompareN);
  TrajectoryBatch ta = rollout(ra.net, x0, a.grid_steps);
  TrajectoryBatch tb = rollout(rb.net, x0, b.grid_steps);

  auto side_json = [&](const RunConfig& cfg, const TrainResult& res,
                       const TrajectoryBatch& traj) {
    const std::size_t k02 = nearest_knot(traj.grid, 0.2);
    const std::size_t k03 = nearest_knot(traj.grid, 0.3);
    std::vector<double> profile = displacement_profile(traj);
    double path_length = 0.0;
    for (double step : profile) path_length += step;
    json s;
    s["method"] = method_to_string(cfg.method);
    s["alpha"] = cfg.action.alpha;
    s["trunk_t02"] = mean_pairwise_distance(traj.states[k02]);
    s["trunk_t03"] = mean_pairwise_distance(traj.states[k03]);
    s["trunk_t02_knot"] = traj.grid.knots[k02];
    s["trunk_t03_knot"] = traj.grid.knots[k03];
    s["displacement_profile"] = profile;
    s["path_length"] = path_length;
    s["endpoint_w1"] = exact_wasserstein(traj.states.back(), target, 1);
    s["last_total"] = res.stats.last_total;
    return s;
  };

  json j;
  j["a"] = side_json(a, ra, ta);
  j["b"] = side_json(b, rb, tb);
  j["n"] = kCompareN;
  j["grid_steps"] = a.grid_steps;
  j["seed_data"] = a.seed_data;
  write_text(out_path, j.dump(2) + "\n");
}

}  // namespace yflow
