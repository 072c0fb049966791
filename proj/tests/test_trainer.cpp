#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "yflow/ot.hpp"
#include "yflow/trainer.hpp"

using namespace yflow;

namespace {

// Small, fast training setup shared by the loop tests; the method and the
// iteration count vary per test, everything else is fixed.
const char* kTinyBase =
    "grid.steps = 4\n"
    "opt.batch-size = 8\n"
    "sinkhorn.epsilon = 1.0\n"
    "sinkhorn.iterations = 8\n"
    "net.hidden-width = 8\n"
    "net.hidden-layers = 1\n"
    "net.time-embed-dim = 8\n"
    "data.samples-per-side = 64\n";

RunConfig tiny(std::size_t iterations = 5, const std::string& extra = "") {
  return RunConfig::from_text("method = yflow\nopt.iterations = " +
                              std::to_string(iterations) + "\n" + kTinyBase + extra);
}

bool bitwise_equal(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j].shape != b[j].shape) return false;
    for (std::size_t i = 0; i < a[j].numel(); ++i)
      if (a[j].at(i) != b[j].at(i)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adam reduces to sign descent on constant gradients") {
  // With a constant gradient g the bias-corrected moments satisfy m̂ = g and
  // v̂ = g² exactly, so every step moves each weight by lr·g/(|g|+1e-8).
  OptimizerConfig oc;
  oc.lr = 0.1;
  Adam adam(oc);
  std::vector<Tensor> master = {Tensor::from({2}, {1.0, 2.0}),
                                Tensor::from({2}, {5.0, 6.0})};
  Tape tape;
  std::vector<Tensor> taped = {tape.watch(master[0]), tape.watch(master[1])};
  std::unordered_map<int, Tensor> grads;
  grads.emplace(taped[0].node, Tensor::from({2}, {0.5, -1.0}));
  // master[1] gets no gradient at all

  adam.step(master, taped, grads);
  CHECK(adam.steps_taken() == 1);
  CHECK(master[0].at(0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(master[0].at(1) == doctest::Approx(2.0 + 0.1 * 1.0 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(master[1].at(0) == 5.0);
  CHECK(master[1].at(1) == 6.0);

  adam.step(master, taped, grads);
  CHECK(master[0].at(0) ==
        doctest::Approx(1.0 - 2 * 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(master[0].at(1) ==
        doctest::Approx(2.0 + 2 * 0.1 * 1.0 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(master[1].at(0) == 5.0);  // zero-gradient weights never move

  std::vector<Tensor> wrong = {master[0]};
  CHECK_THROWS_AS(adam.step(master, wrong, grads), std::invalid_argument);
}

TEST_CASE("global-norm clipping equals pre-scaling the gradient bundle") {
  // Clipping at C with bundle norm N > C must produce exactly the trajectory
  // of an unclipped Adam fed gradients scaled by C/N; a loose threshold must
  // change nothing at all.
  const std::vector<double> g0 = {3.0, -4.0};  // norm 5 on its own
  const std::vector<double> g1 = {12.0};       // bundle norm sqrt(25+144)=13
  const double clip = 2.0, scale = clip / 13.0;

  OptimizerConfig clipped_cfg;
  clipped_cfg.grad_clip = clip;
  Adam clipped(clipped_cfg);
  Adam manual{OptimizerConfig{}};

  std::vector<Tensor> ma = {Tensor::from({2}, {1.0, 2.0}), Tensor::from({1}, {3.0})};
  std::vector<Tensor> mb = {Tensor::from({2}, {1.0, 2.0}), Tensor::from({1}, {3.0})};
  Tape ta, tb;
  std::vector<Tensor> pa = {ta.watch(ma[0]), ta.watch(ma[1])};
  std::vector<Tensor> pb = {tb.watch(mb[0]), tb.watch(mb[1])};
  std::unordered_map<int, Tensor> ga, gb;
  ga.emplace(pa[0].node, Tensor::from({2}, g0));
  ga.emplace(pa[1].node, Tensor::from({1}, g1));
  gb.emplace(pb[0].node, Tensor::from({2}, {g0[0] * scale, g0[1] * scale}));
  gb.emplace(pb[1].node, Tensor::from({1}, {g1[0] * scale}));

  for (int s = 0; s < 3; ++s) {
    clipped.step(ma, pa, ga);
    manual.step(mb, pb, gb);
  }
  CHECK(bitwise_equal(ma, mb));

  OptimizerConfig loose_cfg;
  loose_cfg.grad_clip = 100.0;  // above the bundle norm: inert
  Adam loose(loose_cfg);
  Adam plain{OptimizerConfig{}};
  std::vector<Tensor> mc = {Tensor::from({2}, {1.0, 2.0}), Tensor::from({1}, {3.0})};
  std::vector<Tensor> md = {Tensor::from({2}, {1.0, 2.0}), Tensor::from({1}, {3.0})};
  Tape tc, td;
  std::vector<Tensor> pc = {tc.watch(mc[0]), tc.watch(mc[1])};
  std::vector<Tensor> pd = {td.watch(md[0]), td.watch(md[1])};
  std::unordered_map<int, Tensor> gc, gd;
  gc.emplace(pc[0].node, Tensor::from({2}, g0));
  gc.emplace(pc[1].node, Tensor::from({1}, g1));
  gd.emplace(pd[0].node, Tensor::from({2}, g0));
  gd.emplace(pd[1].node, Tensor::from({1}, g1));
  loose.step(mc, pc, gc);
  plain.step(md, pd, gd);
  CHECK(bitwise_equal(mc, md));
}

TEST_CASE("batch providers replay their streams deterministically") {
  DatasetSpec spec;
  spec.samples_per_side = 32;
  BatchProvider a(spec, 9);
  BatchProvider b(spec, 9);
  CHECK(a.dim() == 2);
  Tensor a1 = a.draw(Side::Source, 6);
  Tensor a2 = a.draw(Side::Source, 6);  // the stream advances
  bool all_same = true;
  for (std::size_t i = 0; i < a1.numel(); ++i) all_same &= a1.at(i) == a2.at(i);
  CHECK(!all_same);
  Tensor b1 = b.draw(Side::Source, 6);
  for (std::size_t i = 0; i < a1.numel(); ++i) CHECK(a1.at(i) == b1.at(i));

  // the provider is a thin wrapper over the mixture sampler streams
  DatasetSpec direct = spec;
  direct.seed = 9;
  MixtureSampler ms(direct, Side::Target);
  Tensor want = ms.draw(5).x;
  Tensor got = a.draw(Side::Target, 5);
  for (std::size_t i = 0; i < want.numel(); ++i) CHECK(got.at(i) == want.at(i));
}

TEST_CASE("csv batch providers draw rows from the pools") {
  const char* src = "tmp_pool_src.csv";
  const char* tgt = "tmp_pool_tgt.csv";
  {
    std::ofstream f(src);
    f << "0,10\n1,11\n2,12\n3,13\n4,14\n";
    std::ofstream g(tgt);
    g << "100,200\n101,201\n102,202\n";
  }
  DatasetSpec spec;
  spec.kind = DatasetKind::Csv;
  spec.csv_source = src;
  spec.csv_target = tgt;
  BatchProvider a(spec, 4), b(spec, 4);
  CHECK(a.dim() == 2);
  Tensor xs = a.draw(Side::Source, 8);
  REQUIRE(xs.rows() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    const double first = xs.at(i * 2);
    CHECK(first >= 0.0);
    CHECK(first <= 4.0);
    CHECK(xs.at(i * 2 + 1) == first + 10.0);  // rows arrive intact
  }
  Tensor xt = a.draw(Side::Target, 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(xt.at(i * 2 + 1) == xt.at(i * 2) + 100.0);
  // same seed, same call sequence, same rows
  Tensor ys = b.draw(Side::Source, 8);
  for (std::size_t i = 0; i < ys.numel(); ++i) CHECK(ys.at(i) == xs.at(i));
  std::remove(src);
  std::remove(tgt);
}

TEST_CASE("epsilon resolution prefers the configured value") {
  RunConfig rc = tiny();
  BatchProvider data(rc.data, rc.seed_data);
  CHECK(resolve_epsilon(rc, data) == 1.0);

  RunConfig autorc = tiny(5, "seed.data = 5\n");
  autorc.sinkhorn.epsilon = 0.0;
  BatchProvider data2(autorc.data, autorc.seed_data);
  const double eps = resolve_epsilon(autorc, data2);
  CHECK(eps > 0.0);
  // replicate the documented probe: fresh provider, min(batch, 512) points
  BatchProvider probe(autorc.data, autorc.seed_data);
  Tensor pa = probe.draw(Side::Source, 8);
  Tensor pb = probe.draw(Side::Target, 8);
  CHECK(eps == auto_epsilon(cost_matrix(pa, pb, 2)));
  // probing must not have advanced the training provider's streams
  BatchProvider fresh(autorc.data, autorc.seed_data);
  Tensor d1 = data2.draw(Side::Source, 4);
  Tensor f1 = fresh.draw(Side::Source, 4);
  for (std::size_t i = 0; i < d1.numel(); ++i) CHECK(d1.at(i) == f1.at(i));
}

TEST_CASE("a zero learning rate leaves the parameters untouched") {
  RunConfig rc = tiny(5, "opt.lr = 0\n");
  TrainResult res = train_run(rc);
  VelocityNetConfig nc = rc.net;
  nc.dim = 2;
  VelocityNet ref(nc);
  ref.init(rc.seed_init);
  CHECK(bitwise_equal(res.final_checkpoint.params, ref.params()));
  CHECK(res.rows.size() == 5);
  CHECK(res.final_checkpoint.iteration == 5);
}

TEST_CASE("iterations zero yields only the initial checkpoint") {
  RunConfig rc = tiny(0);
  int sink_calls = 0;
  TrainResult res = train_run(rc, [&](const Checkpoint&) { ++sink_calls; });
  CHECK(sink_calls == 0);
  CHECK(res.rows.empty());
  CHECK(res.final_checkpoint.iteration == 0);
  CHECK(res.stats.rows == 0);
  VelocityNetConfig nc = rc.net;
  nc.dim = 2;
  VelocityNet ref(nc);
  ref.init(rc.seed_init);
  CHECK(bitwise_equal(res.final_checkpoint.params, ref.params()));
}

TEST_CASE("reruns of the same config are bitwise identical") {
  RunConfig rc = tiny();
  TrainResult r1 = train_run(rc);
  TrainResult r2 = train_run(rc);
  REQUIRE(r1.rows.size() == r2.rows.size());
  for (std::size_t i = 0; i < r1.rows.size(); ++i) {
    CHECK(r1.rows[i].total == r2.rows[i].total);
    CHECK(r1.rows[i].action == r2.rows[i].action);
    CHECK(r1.rows[i].sinkhorn == r2.rows[i].sinkhorn);
    CHECK(r1.rows[i].sobolev == r2.rows[i].sobolev);
  }
  CHECK(bitwise_equal(r1.final_checkpoint.params, r2.final_checkpoint.params));
  CHECK(r1.resolved_epsilon == r2.resolved_epsilon);
  CHECK(r1.stats.best_total == r2.stats.best_total);
  // the loss actually moved (this is training, not a no-op)
  CHECK(r1.rows.front().total != r1.rows.back().total);
  // breakdown columns recompose the logged total
  for (const LossRow& row : r1.rows)
    CHECK(row.total ==
          doctest::Approx(row.action + 5.0 * row.sinkhorn).epsilon(1e-12));
}

TEST_CASE("periodic checkpoints arrive on schedule") {
  RunConfig rc = tiny(7, "opt.checkpoint-every = 2\n");
  std::vector<std::uint64_t> seen;
  TrainResult res = train_run(rc, [&](const Checkpoint& c) {
    seen.push_back(c.iteration);
    CHECK(c.config_text == rc.config_text);
    CHECK(c.stats.rows == c.iteration);
  });
  CHECK(seen == std::vector<std::uint64_t>{2, 4, 6});
  CHECK(res.final_checkpoint.iteration == 7);
  CHECK(res.final_checkpoint.config_text == rc.config_text);
  CHECK(res.stats.rows == 7);
  CHECK(res.stats.last_total == res.rows.back().total);
  double best = res.rows[0].total;
  for (const LossRow& row : res.rows) best = std::min(best, row.total);
  CHECK(res.stats.best_total == best);
}

TEST_CASE("checkpoints taken mid-run snapshot, not alias, the parameters") {
  RunConfig rc = tiny(4, "opt.checkpoint-every = 2\n");
  std::vector<Checkpoint> kept;
  train_run(rc, [&](const Checkpoint& c) { kept.push_back(c); });
  REQUIRE(kept.size() == 1);  // iteration 2 only (4 is the final checkpoint)
  RunConfig rc2 = tiny(2, "opt.checkpoint-every = 0\n");
  TrainResult two = train_run(rc2);
  CHECK(bitwise_equal(kept[0].params, two.final_checkpoint.params));
}

TEST_CASE("the flow-matching loss falls on an easy task") {
  RunConfig rc = RunConfig::from_text(
      "method = fm\n"
      "opt.batch-size = 32\n"
      "opt.iterations = 300\n"
      "opt.lr = 0.003\n"
      "net.hidden-width = 16\n"
      "net.hidden-layers = 1\n"
      "net.time-embed-dim = 8\n"
      "data.branches = 1\n"
      "data.samples-per-side = 256\n");
  TrainResult res = train_run(rc);
  REQUIRE(res.rows.size() == 300);
  double m1 = 0, m2 = 0, m3 = 0;
  for (int i = 0; i < 100; ++i) {
    m1 += res.rows[i].total;
    m2 += res.rows[100 + i].total;
    m3 += res.rows[200 + i].total;
  }
  CHECK(m2 < m1);
  CHECK(m3 < m2);
  // baseline rows carry no decomposition
  CHECK(res.rows[0].action == 0.0);
  CHECK(res.rows[0].sinkhorn == 0.0);
}

TEST_CASE("the endpoint divergence falls during a short transport run") {
  RunConfig rc = RunConfig::from_text(
      "method = yflow\n"
      "grid.steps = 6\n"
      "opt.batch-size = 16\n"
      "opt.iterations = 150\n"
      "opt.lr = 0.01\n"
      "sinkhorn.epsilon = 1.0\n"
      "sinkhorn.iterations = 10\n"
      "net.hidden-width = 16\n"
      "net.hidden-layers = 1\n"
      "net.time-embed-dim = 8\n"
      "data.samples-per-side = 256\n");
  TrainResult res = train_run(rc);
  double head = 0, tail = 0;
  for (int i = 0; i < 30; ++i) {
    head += res.rows[i].sinkhorn;
    tail += res.rows[120 + i].sinkhorn;
  }
  CHECK(tail < head);
}

TEST_CASE("divergent runs report the failing iteration") {
  RunConfig rc = tiny(50, "opt.lr = 1e14\n");
  try {
    train_run(rc);
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("iteration ") != std::string::npos);
  }
}

TEST_CASE("all method variants run end to end") {
  for (const char* method : {"yflow", "yflow-sobolev", "yflow-mm", "fm", "cfm", "ot-cfm"}) {
    std::string text = "method = " + std::string(method) + "\nopt.iterations = 2\n" +
                       kTinyBase;
    if (std::string(method) == "yflow-sobolev") text += "action.lambda-sobolev = 0.1\n";
    if (std::string(method) == "yflow-mm")
      text += "action.mm-epsilon = 0.2\naction.mm-gamma1 = -0.5\naction.mm-gamma2 = 0.5\n";
    TrainResult res = train_run(RunConfig::from_text(text));
    CHECK(res.rows.size() == 2);
    CHECK(std::isfinite(res.rows.back().total));
  }
}
