#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "yflow/checkpoint.hpp"
#include "yflow/commands.hpp"
#include "yflow/datasets.hpp"
#include "yflow/integrator.hpp"
#include "yflow/ot.hpp"
#include "yflow/trainer.hpp"

using namespace yflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Self-cleaning scratch directory for one test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::path("tmp_cmd") / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

// Parsed numeric CSV plus its header line.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(const std::string& path) {
  Table t;
  std::istringstream in(slurp(path));
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
      continue;
    }
    std::vector<double> row;
    for (const std::string& c : cells) row.push_back(std::stod(c));
    t.rows.push_back(row);
  }
  return t;
}

std::string tiny_train_cfg(const std::string& out_dir, const std::string& extra = "") {
  return "method = yflow\n"
         "grid.steps = 10\n"
         "opt.batch-size = 8\n"
         "opt.iterations = 6\n"
         "opt.checkpoint-every = 0\n"
         "sinkhorn.epsilon = 1.0\n"
         "sinkhorn.iterations = 6\n"
         "net.hidden-width = 8\n"
         "net.hidden-layers = 1\n"
         "net.time-embed-dim = 8\n"
         "data.samples-per-side = 64\n"
         "run.output-dir = " +
         out_dir + "\n" + extra;
}

}  // namespace

TEST_CASE("train writes the full artifact set and reruns bitwise") {
  Scratch s("train");
  const std::string cfg_path = s / "run.cfg";
  const std::string cfg_text = tiny_train_cfg(s / "out");
  spit(cfg_path, cfg_text);

  cmd_train(cfg_path);
  CHECK(slurp(s / "out/config.txt") == cfg_text);

  Table loss = read_table(s / "out/loss.csv");
  CHECK(loss.header ==
        std::vector<std::string>{"iteration", "total", "action", "sinkhorn", "sobolev"});
  REQUIRE(loss.rows.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(loss.rows[i][0] == static_cast<double>(i + 1));
    CHECK(std::isfinite(loss.rows[i][1]));
    // logged columns recompose the logged total (lambda_sinkhorn = 5)
    CHECK(loss.rows[i][1] ==
          doctest::Approx(loss.rows[i][2] + 5.0 * loss.rows[i][3]).epsilon(1e-12));
  }

  json run = json::parse(slurp(s / "out/run.json"));
  CHECK(run["method"] == "yflow");
  CHECK(run["resolved_epsilon"] == 1.0);
  CHECK(run["iterations"] == 6);
  CHECK(run["dim"] == 2);

  const std::string first_ckpt = slurp(s / "out/checkpoint.bin");
  const std::string first_loss = slurp(s / "out/loss.csv");
  cmd_train(cfg_path);
  CHECK(slurp(s / "out/checkpoint.bin") == first_ckpt);
  CHECK(slurp(s / "out/loss.csv") == first_loss);
  CHECK(slurp(s / "out/run.json") == slurp(s / "out/run.json"));
}

TEST_CASE("train with zero iterations leaves the header and the initial state") {
  Scratch s("train0");
  const std::string cfg_path = s / "run.cfg";
  spit(cfg_path, tiny_train_cfg(s / "out", "seed.init = 5\n") );
  // zero iterations: rewrite the key
  std::string text = slurp(cfg_path);
  text.replace(text.find("opt.iterations = 6"), 18, "opt.iterations = 0");
  spit(cfg_path, text);

  cmd_train(cfg_path);
  CHECK(slurp(s / "out/loss.csv") == "iteration,total,action,sinkhorn,sobolev\n");
  Checkpoint ckpt = load_checkpoint(s / "out/checkpoint.bin");
  CHECK(ckpt.iteration == 0);
  auto [cfg, net] = net_from_checkpoint(ckpt);
  VelocityNetConfig nc = cfg.net;
  nc.dim = 2;
  VelocityNet ref(nc);
  ref.init(5);
  REQUIRE(net.params().size() == ref.params().size());
  for (std::size_t j = 0; j < ref.params().size(); ++j)
    for (std::size_t i = 0; i < ref.params()[j].numel(); ++i)
      CHECK(net.params()[j].at(i) == ref.params()[j].at(i));
}

TEST_CASE("periodic checkpoints appear at the configured cadence") {
  Scratch s("periodic");
  const std::string cfg_path = s / "run.cfg";
  std::string text = tiny_train_cfg(s / "out");
  text.replace(text.find("opt.checkpoint-every = 0"), 24, "opt.checkpoint-every = 2");
  spit(cfg_path, text);
  cmd_train(cfg_path);
  CHECK(fs::exists(fs::path(s / "out/checkpoint_2.bin")));
  CHECK(fs::exists(fs::path(s / "out/checkpoint_4.bin")));
  CHECK(!fs::exists(fs::path(s / "out/checkpoint_6.bin")));  // 6 is the final one
  CHECK(fs::exists(fs::path(s / "out/checkpoint.bin")));
  CHECK(load_checkpoint(s / "out/checkpoint_4.bin").iteration == 4);
}

TEST_CASE("sampling at the training grid reproduces integration bitwise") {
  Scratch s("sample");
  const std::string cfg_path = s / "run.cfg";
  spit(cfg_path, tiny_train_cfg(s / "out"));
  cmd_train(cfg_path);

  cmd_sample(s / "out/checkpoint.bin", 6, 10, 5, s / "endpoints.csv");
  Table tab = read_table(s / "endpoints.csv");
  CHECK(tab.header == std::vector<std::string>{"x1", "x2"});
  REQUIRE(tab.rows.size() == 6);

  auto [cfg, net] = net_from_checkpoint(load_checkpoint(s / "out/checkpoint.bin"));
  BatchProvider data(cfg.data, 5);
  Tensor x0 = data.draw(Side::Source, 6);
  TrajectoryBatch traj =
      integrate(net, x0, TimeGrid::uniform(10), Scheme::Euler, /*record_tape=*/false);
  const Tensor& end = traj.states.back();
  for (std::size_t i = 0; i < 6; ++i) {
    // %.17g CSV round-trips doubles exactly, so equality is bitwise
    CHECK(tab.rows[i][0] == end.at(i * 2));
    CHECK(tab.rows[i][1] == end.at(i * 2 + 1));
  }
}

TEST_CASE("sampling zero points leaves a header-only CSV") {
  Scratch s("sample0");
  const std::string cfg_path = s / "run.cfg";
  spit(cfg_path, tiny_train_cfg(s / "out"));
  cmd_train(cfg_path);
  cmd_sample(s / "out/checkpoint.bin", 0, 10, 5, s / "empty.csv");
  CHECK(slurp(s / "empty.csv") == "x1,x2\n");
}

TEST_CASE("eval emits round-tripping JSON with its constants recorded") {
  Scratch s("eval");
  const std::string cfg_path = s / "run.cfg";
  spit(cfg_path, tiny_train_cfg(s / "out"));
  cmd_train(cfg_path);
  cmd_eval(s / "out/checkpoint.bin", "", 64, 4, 9, 32, s / "metrics.json");

  const std::string raw = slurp(s / "metrics.json");
  json j = json::parse(raw);  // throws if malformed
  CHECK(j.dump(2) + "\n" == raw);
  for (const char* key : {"w1", "w2", "mmd", "sinkhorn"}) {
    CHECK(j.contains(key));
    CHECK(j[key].get<double>() >= -1e-9);
    CHECK(std::isfinite(j[key].get<double>()));
  }
  CHECK(j["sinkhorn_epsilon"] == 1.0);
  CHECK(j["sinkhorn_iterations"] == 6);
  CHECK(j["n"] == 64);
  CHECK(j["metric_cap"] == 32);
  CHECK(j["points_used"] == 32);
  CHECK(j["seed"] == 9);
  CHECK(j["steps"] == 4);

  // rerun: identical bytes
  cmd_eval(s / "out/checkpoint.bin", "", 64, 4, 9, 32, s / "metrics2.json");
  CHECK(slurp(s / "metrics2.json") == raw);
}

TEST_CASE("eval accepts a dataset override and rejects dimension mismatches") {
  Scratch s("evalover");
  const std::string cfg_path = s / "run.cfg";
  spit(cfg_path, tiny_train_cfg(s / "out"));
  cmd_train(cfg_path);

  // same dimension, different branch count: fine
  spit(s / "data3.cfg", "data.branches = 3\n");
  cmd_eval(s / "out/checkpoint.bin", s / "data3.cfg", 32, 4, 9, 16, s / "m3.json");
  CHECK(json::parse(slurp(s / "m3.json")).contains("w1"));

  // different dimension: rejected
  spit(s / "data4.cfg", "data.dim = 4\n");
  CHECK_THROWS_AS(
      cmd_eval(s / "out/checkpoint.bin", s / "data4.cfg", 32, 4, 9, 16, s / "m4.json"),
      config_error);
}

TEST_CASE("the metric suite reports zero self-distance for coincident draws") {
  DatasetSpec spec;
  spec.seed = 11;
  MixtureSampler t1(spec, Side::Target);
  spec.seed = 11;
  MixtureSampler t2(spec, Side::Target);
  Tensor a = t1.draw(256).x;
  Tensor b = t2.draw(256).x;
  CHECK(exact_wasserstein(a, b, 1) <= 1e-12);
  CHECK(exact_wasserstein(a, b, 2) <= 1e-12);
  CHECK(rbf_mmd(a, b) <= 1e-12);
  CHECK(std::abs(sinkhorn_divergence(a, b, 0.1, 20).value()) <= 1e-9);
}

TEST_CASE("the metric suite stays small between independent same-law draws") {
  // Finite-sample Wasserstein between independent 1024-point draws has an
  // empirical floor near 0.04-0.09 on this data (it is a real distance, not
  // an implementation artifact), while the U-statistic MMD and the debiased
  // Sinkhorn divergence are unbiased near zero.
  DatasetSpec spec;
  spec.seed = 21;
  MixtureSampler t1(spec, Side::Target);
  spec.seed = 22;
  MixtureSampler t2(spec, Side::Target);
  Tensor a = t1.draw(1024).x;
  Tensor b = t2.draw(1024).x;
  CHECK(rbf_mmd(a, b) < 0.05);
  CHECK(std::abs(sinkhorn_divergence(a, b, 0.5, 30).value()) < 0.05);
  CHECK(exact_wasserstein(a, b, 1) < 0.3);
  CHECK(exact_wasserstein(a, b, 2) < 0.5);
}

TEST_CASE("metrics are permutation-invariant to sample order") {
  DatasetSpec spec;
  spec.seed = 31;
  MixtureSampler t(spec, Side::Target);
  Tensor a = t.draw(64).x;
  Tensor b = t.draw(64).x;
  // reverse the rows of a
  std::vector<double> rev(a.numel());
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t c = 0; c < 2; ++c) rev[i * 2 + c] = a.at((63 - i) * 2 + c);
  Tensor ar = Tensor::from({64, 2}, std::move(rev));
  CHECK(exact_wasserstein(ar, b, 1) ==
        doctest::Approx(exact_wasserstein(a, b, 1)).epsilon(1e-12));
  CHECK(exact_wasserstein(ar, b, 2) ==
        doctest::Approx(exact_wasserstein(a, b, 2)).epsilon(1e-12));
  CHECK(rbf_mmd(ar, b) == doctest::Approx(rbf_mmd(a, b)).epsilon(1e-12));
  CHECK(sinkhorn_divergence(ar, b, 0.5, 20).value() ==
        doctest::Approx(sinkhorn_divergence(a, b, 0.5, 20).value()).epsilon(1e-12));
}

TEST_CASE("trajectory export keeps the declared row discipline") {
  Scratch s("traj");
  const std::string cfg_path = s / "run.cfg";
  spit(cfg_path, tiny_train_cfg(s / "out"));
  cmd_train(cfg_path);
  cmd_export_traj(s / "out/checkpoint.bin", 4, 5, 3, s / "traj.csv");
  Table tab = read_table(s / "traj.csv");
  CHECK(tab.header.front() == "particle-id");
  CHECK(tab.header.back() == "vnorm");
  REQUIRE(tab.rows.size() == 4 * 6);  // n*(K'+1)
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    CHECK(tab.rows[r][0] == static_cast<double>(r / 6));  // particle-id
    CHECK(tab.rows[r][1] == static_cast<double>(r % 6));  // k
  }
  // Euler recurrence, reconstructed from the rows alone:
  // ||x_{k+1} - x_k|| = (t_{k+1} - t_k) * ||v_k|| within 1e-12
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 5; ++k) {
      const auto& row = tab.rows[i * 6 + k];
      const auto& next = tab.rows[i * 6 + k + 1];
      const double dt = next[2] - row[2];
      const double dx = next[3] - row[3];
      const double dy = next[4] - row[4];
      const double lhs = std::sqrt(dx * dx + dy * dy);
      const double rhs = dt * row[5];
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("a zero field exports constant trajectories") {
  Scratch s("trajzero");
  const std::string cfg_text = tiny_train_cfg(s / "out");
  RunConfig cfg = RunConfig::from_text(cfg_text);
  VelocityNetConfig nc = cfg.net;
  nc.dim = 2;
  VelocityNet net(nc);
  net.init(1);
  for (Tensor& p : net.params())
    for (double& v : p.vals()) v = 0.0;
  Checkpoint ckpt;
  ckpt.config_text = cfg_text;
  ckpt.iteration = 0;
  for (const Tensor& p : net.params()) ckpt.params.push_back(Tensor::from(p.shape, p.vals()));
  save_checkpoint(s / "zero.bin", ckpt);

  cmd_export_traj(s / "zero.bin", 3, 4, 3, s / "traj.csv");
  Table tab = read_table(s / "traj.csv");
  REQUIRE(tab.rows.size() == 3 * 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k <= 4; ++k) {
      const auto& row = tab.rows[i * 5 + k];
      CHECK(row[3] == tab.rows[i * 5][3]);  // x frozen
      CHECK(row[4] == tab.rows[i * 5][4]);
      CHECK(row[5] == 0.0);  // vnorm
    }
}

TEST_CASE("comparing a config against itself yields identical sides") {
  Scratch s("cmpself");
  spit(s / "a.cfg", tiny_train_cfg(s / "outa"));
  spit(s / "b.cfg", tiny_train_cfg(s / "outb"));  // only the output dir differs
  cmd_compare(s / "a.cfg", s / "b.cfg", s / "cmp.json");
  json j = json::parse(slurp(s / "cmp.json"));
  CHECK(j["a"]["trunk_t02"] == j["b"]["trunk_t02"]);
  CHECK(j["a"]["trunk_t03"] == j["b"]["trunk_t03"]);
  CHECK(j["a"]["endpoint_w1"] == j["b"]["endpoint_w1"]);
  CHECK(j["a"]["path_length"] == j["b"]["path_length"]);
  CHECK(j["a"]["displacement_profile"] == j["b"]["displacement_profile"]);
  CHECK(j["a"]["trunk_t02_knot"] == 0.2);
  CHECK(j["a"]["trunk_t03_knot"] == 0.3);

  // the displacement profile telescopes to the path length
  double sum = 0.0;
  for (double step : j["a"]["displacement_profile"]) sum += step;
  CHECK(sum == doctest::Approx(j["a"]["path_length"].get<double>()).epsilon(1e-9));
  REQUIRE(j["a"]["displacement_profile"].size() == 10);
}

TEST_CASE("comparison rejects mismatched setups") {
  Scratch s("cmpbad");
  spit(s / "a.cfg", tiny_train_cfg(s / "outa"));
  spit(s / "b.cfg", tiny_train_cfg(s / "outb", "data.branches = 3\n"));
  try {
    cmd_compare(s / "a.cfg", s / "b.cfg", s / "cmp.json");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("dataset") != std::string::npos);
  }
  std::string widened = tiny_train_cfg(s / "outc");
  widened.replace(widened.find("net.hidden-width = 8"), 20, "net.hidden-width = 16");
  spit(s / "c.cfg", widened);
  try {
    cmd_compare(s / "a.cfg", s / "c.cfg", s / "cmp.json");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("architecture") != std::string::npos);
  }
  spit(s / "d.cfg", tiny_train_cfg(s / "outd", "seed.train = 9\n"));
  CHECK_THROWS_AS(cmd_compare(s / "a.cfg", s / "d.cfg", s / "cmp.json"), config_error);
}
