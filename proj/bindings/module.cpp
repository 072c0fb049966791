// Python bindings for the main operations: OT metrics, training, sampling.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "yflow/checkpoint.hpp"
#include "yflow/config.hpp"
#include "yflow/integrator.hpp"
#include "yflow/ot.hpp"
#include "yflow/trainer.hpp"

namespace py = pybind11;
using namespace yflow;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-D float array");
  const std::size_t r = static_cast<std::size_t>(arr.shape(0));
  const std::size_t c = static_cast<std::size_t>(arr.shape(1));
  std::vector<double> v(arr.data(), arr.data() + r * c);
  return Tensor::from({r, c}, std::move(v));
}

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.vals().begin(), t.vals().end(), out.mutable_data());
  return out;
}

struct OpenedCheckpoint {
  RunConfig cfg;
  VelocityNet net;
};

OpenedCheckpoint open_checkpoint(const std::string& path) {
  auto [cfg, net] = net_from_checkpoint(load_checkpoint(path));
  return OpenedCheckpoint{std::move(cfg), std::move(net)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Y-shaped generative flows: transport metrics, training, sampling";

  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<numeric_error>(m, "NumericError");

  m.def(
      "cost_matrix",
      [](const Array& X, const Array& Y, int p) {
        return to_array(cost_matrix(to_tensor(X), to_tensor(Y), p));
      },
      py::arg("x"), py::arg("y"), py::arg("p") = 2,
      "Pairwise ||x_i - y_j||^p cost matrix, p in {1, 2}.");

  m.def(
      "auto_epsilon",
      [](const Array& C, double factor) { return auto_epsilon(to_tensor(C), factor); },
      py::arg("cost"), py::arg("factor") = 0.05,
      "Scale-relative entropic temperature: factor * mean(cost).");

  m.def(
      "sinkhorn_divergence",
      [](const Array& X, const Array& Y, double epsilon, std::size_t iterations) {
        return sinkhorn_divergence(to_tensor(X), to_tensor(Y), epsilon, iterations).value();
      },
      py::arg("x"), py::arg("y"), py::arg("epsilon"), py::arg("iterations") = 200,
      "Debiased entropic divergence S_eps(X, Y) with squared-Euclidean cost.");

  m.def(
      "sinkhorn_ot",
      [](const Array& C, double epsilon, std::size_t iterations) {
        const Tensor cost = to_tensor(C);
        const std::size_t m_rows = cost.rows(), n_cols = cost.cols();
        const std::vector<double> a(m_rows, 1.0 / static_cast<double>(m_rows));
        const std::vector<double> b(n_cols, 1.0 / static_cast<double>(n_cols));
        SinkhornResult res = sinkhorn_ot(a, b, cost, epsilon, iterations);
        py::dict out;
        out["value"] = res.value;
        out["plan"] = to_array(res.plan);
        out["max_row_violation"] = res.max_row_violation;
        out["max_col_violation"] = res.max_col_violation;
        return out;
      },
      py::arg("cost"), py::arg("epsilon"), py::arg("iterations") = 200,
      "Uniform-marginal entropic OT on a cost matrix; returns value and plan.");

  m.def(
      "exact_wasserstein",
      [](const Array& X, const Array& Y, int p) {
        return exact_wasserstein(to_tensor(X), to_tensor(Y), p);
      },
      py::arg("x"), py::arg("y"), py::arg("p") = 1,
      "Exact W_p between equal-size samples via optimal assignment.");

  m.def(
      "rbf_mmd",
      [](const Array& X, const Array& Y, double bandwidth) {
        return rbf_mmd(to_tensor(X), to_tensor(Y), bandwidth);
      },
      py::arg("x"), py::arg("y"), py::arg("bandwidth") = 0.0,
      "Unbiased Gaussian-kernel MMD; bandwidth <= 0 uses the median heuristic.");

  m.def(
      "minibatch_ot_coupling",
      [](const Array& X0, const Array& X1) {
        return minibatch_ot_coupling(to_tensor(X0), to_tensor(X1));
      },
      py::arg("x0"), py::arg("x1"),
      "Assignment minimizing the total squared pairing cost (row i -> result[i]).");

  m.def(
      "train",
      [](const std::string& config_text, const std::string& checkpoint_out) {
        RunConfig cfg = RunConfig::from_text(config_text);
        TrainResult res = train_run(cfg);
        if (!checkpoint_out.empty()) save_checkpoint(checkpoint_out, res.final_checkpoint);
        const std::size_t n = res.rows.size();
        py::array_t<double> totals(n), actions(n), sinkhorns(n), sobolevs(n);
        for (std::size_t i = 0; i < n; ++i) {
          totals.mutable_data()[i] = res.rows[i].total;
          actions.mutable_data()[i] = res.rows[i].action;
          sinkhorns.mutable_data()[i] = res.rows[i].sinkhorn;
          sobolevs.mutable_data()[i] = res.rows[i].sobolev;
        }
        py::dict out;
        out["total"] = totals;
        out["action"] = actions;
        out["sinkhorn"] = sinkhorns;
        out["sobolev"] = sobolevs;
        out["resolved_epsilon"] = res.resolved_epsilon;
        out["iterations"] = res.final_checkpoint.iteration;
        return out;
      },
      py::arg("config_text"), py::arg("checkpoint_out") = "",
      "Run the full training loop for a config; optionally save the final "
      "checkpoint. Returns the per-iteration loss columns.");

  m.def(
      "checkpoint_info",
      [](const std::string& path) {
        Checkpoint c = load_checkpoint(path);
        std::size_t n_params = 0;
        for (const Tensor& p : c.params) n_params += p.numel();
        py::dict out;
        out["iteration"] = c.iteration;
        out["config"] = c.config_text;
        out["n_tensors"] = c.params.size();
        out["n_params"] = n_params;
        out["last_total"] = c.stats.last_total;
        out["best_total"] = c.stats.best_total;
        return out;
      },
      py::arg("path"), "Header data of a saved checkpoint.");

  m.def(
      "velocity",
      [](const std::string& ckpt_path, const Array& X, double t) {
        OpenedCheckpoint oc = open_checkpoint(ckpt_path);
        return to_array(oc.net.eval(oc.net.params(), to_tensor(X), t));
      },
      py::arg("checkpoint"), py::arg("x"), py::arg("t"),
      "Evaluate the checkpointed velocity field at (x, t).");

  m.def(
      "sample",
      [](const std::string& ckpt_path, std::size_t n, std::size_t steps,
         std::uint64_t seed) {
        OpenedCheckpoint oc = open_checkpoint(ckpt_path);
        BatchProvider data(oc.cfg.data, seed);
        Tensor x0 = data.draw(Side::Source, n);
        TrajectoryBatch traj = integrate(oc.net, x0, TimeGrid::uniform(steps),
                                         Scheme::Euler, /*record_tape=*/false);
        return to_array(traj.states.back());
      },
      py::arg("checkpoint"), py::arg("n") = 1024, py::arg("steps") = 10,
      py::arg("seed") = 7, "Integrate n fresh source draws to their endpoints.");

  m.def(
      "trajectories",
      [](const std::string& ckpt_path, std::size_t n, std::size_t steps,
         std::uint64_t seed) {
        OpenedCheckpoint oc = open_checkpoint(ckpt_path);
        BatchProvider data(oc.cfg.data, seed);
        Tensor x0 = data.draw(Side::Source, n);
        TrajectoryBatch traj = integrate(oc.net, x0, TimeGrid::uniform(steps),
                                         Scheme::Euler, /*record_tape=*/false);
        const std::size_t d = traj.dim();
        py::array_t<double> out({steps + 1, n, d});
        double* dst = out.mutable_data();
        for (std::size_t k = 0; k <= steps; ++k)
          for (std::size_t i = 0; i < n * d; ++i) *dst++ = traj.states[k].at(i);
        return out;
      },
      py::arg("checkpoint"), py::arg("n") = 64, py::arg("steps") = 10, py::arg("seed") = 7,
      "Full state stack [steps+1, n, d] of an Euler rollout.");
}
