#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "testing_util.hpp"
#include "yflow/rng.hpp"
#include "yflow/velocity_field.hpp"

using namespace yflow;
using yflow::testing::random_vec;

namespace {

VelocityNetConfig small_cfg() {
  VelocityNetConfig cfg;
  cfg.dim = 2;
  cfg.hidden_width = 8;
  cfg.hidden_layers = 2;
  cfg.time_embed_dim = 4;
  return cfg;
}

}  // namespace

TEST_CASE("parameter count: formula matches a shape walk") {
  VelocityNetConfig cfg;  // defaults: d=2, 3x256, embed 64 learned-linear
  VelocityNet net(cfg);
  std::size_t walked = 0;
  for (const auto& p : net.params()) walked += p.numel();
  CHECK(walked == cfg.param_count());
  CHECK(cfg.param_count() == 149378);  // includes the 1x64+64 learned embed map

  VelocityNetConfig sin_cfg = cfg;
  sin_cfg.time_embed_kind = TimeEmbedKind::Sinusoidal;
  VelocityNet sin_net(sin_cfg);
  walked = 0;
  for (const auto& p : sin_net.params()) walked += p.numel();
  CHECK(walked == sin_cfg.param_count());
  CHECK(sin_cfg.param_count() == 149250);  // (2+64)*256+256 + 2*(256*256+256) + 256*2+2
}

TEST_CASE("config validation") {
  VelocityNetConfig cfg = small_cfg();
  cfg.dim = 0;
  CHECK_THROWS_AS(VelocityNet{cfg}, config_error);
  cfg = small_cfg();
  cfg.hidden_layers = 0;
  CHECK_THROWS_AS(VelocityNet{cfg}, config_error);
  cfg = small_cfg();
  cfg.time_embed_dim = 0;
  CHECK_THROWS_AS(VelocityNet{cfg}, config_error);
}

TEST_CASE("init: deterministic, bounded weights, zero biases") {
  VelocityNet a(small_cfg()), b(small_cfg());
  a.init(42);
  b.init(42);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    const auto& pa = *a.params()[i].data;
    const auto& pb = *b.params()[i].data;
    REQUIRE(pa.size() == pb.size());
    for (std::size_t j = 0; j < pa.size(); ++j) CHECK(pa[j] == pb[j]);
  }
  VelocityNet c(small_cfg());
  c.init(43);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params().size() && !any_diff; ++i)
    any_diff = *a.params()[i].data != *c.params()[i].data;
  CHECK(any_diff);

  for (std::size_t i = 0; i < a.params().size(); ++i) {
    const Tensor& p = a.params()[i];
    if (p.rank() == 2) {
      double bound = std::sqrt(6.0 / static_cast<double>(p.shape[0] + p.shape[1]));
      for (double w : *p.data) CHECK(std::fabs(w) <= bound);
    } else {
      for (double v : *p.data) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("sinusoidal embedding: phase zero pattern and range") {
  VelocityNetConfig cfg = small_cfg();
  cfg.time_embed_dim = 6;
  cfg.time_embed_kind = TimeEmbedKind::Sinusoidal;
  VelocityNet net(cfg);
  Tensor e0 = net.time_embed(0.0);
  REQUIRE(e0.numel() == 6);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(e0.at(i) == (i % 2 == 0 ? 0.0 : 1.0));
  Tensor e = net.time_embed(0.37);
  for (std::size_t i = 0; i < e.numel(); ++i) {
    CHECK(e.at(i) >= -1.0);
    CHECK(e.at(i) <= 1.0);
  }
}

TEST_CASE("learned embedding: zero weights give the activated bias") {
  VelocityNetConfig cfg = small_cfg();
  VelocityNet net(cfg);  // constructed with all-zero parameters
  Tensor e = net.time_embed(0.6);
  for (std::size_t i = 0; i < e.numel(); ++i) CHECK(e.at(i) == 0.0);  // silu(0)=0
  // set a bias, embedding becomes activation(b) independent of t
  (*net.params()[1].data)[2] = 1.5;
  Tensor ea = net.time_embed(0.1);
  Tensor eb = net.time_embed(0.9);
  for (std::size_t i = 0; i < ea.numel(); ++i) CHECK(ea.at(i) == eb.at(i));
  CHECK(ea.at(2) == doctest::Approx(1.5 / (1.0 + std::exp(-1.5))).epsilon(1e-15));
}

TEST_CASE("embedding continuity probe") {
  for (TimeEmbedKind kind : {TimeEmbedKind::LearnedLinear, TimeEmbedKind::Sinusoidal}) {
    VelocityNetConfig cfg;  // full default width so the probe covers the real net
    cfg.time_embed_kind = kind;
    VelocityNet net(cfg);
    net.init(42);
    for (double t : {0.0, 0.25, 0.5, 0.9}) {
      Tensor a = net.time_embed(t);
      Tensor b = net.time_embed(t + 1e-6);
      for (std::size_t i = 0; i < a.numel(); ++i)
        CHECK(std::fabs(a.at(i) - b.at(i)) < 1e-4);
    }
  }
}

TEST_CASE("time outside [0,1] is rejected") {
  VelocityNet net(small_cfg());
  net.init(1);
  CHECK_THROWS_AS(net.time_embed(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(net.time_embed(1.1), std::invalid_argument);
  Tensor x = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(net.eval(x, 2.0), std::invalid_argument);
}

TEST_CASE("zero output head gives the zero field") {
  VelocityNet net(small_cfg());
  net.init(7);
  // zero the head weight + bias (the last two parameter tensors)
  auto& P = net.params();
  std::fill(P[P.size() - 2].data->begin(), P[P.size() - 2].data->end(), 0.0);
  std::fill(P[P.size() - 1].data->begin(), P[P.size() - 1].data->end(), 0.0);
  Tensor x = Tensor::from({4, 2}, random_vec(8, 3, -2.0, 2.0));
  for (double t : {0.0, 0.5, 1.0}) {
    Tensor v = net.eval(x, t);
    for (std::size_t i = 0; i < v.numel(); ++i) CHECK(v.at(i) == 0.0);
  }
}

TEST_CASE("batch rows are independent (bitwise)") {
  VelocityNet net(small_cfg());
  net.init(11);
  Tensor x = Tensor::from({5, 2}, random_vec(10, 4, -3.0, 3.0));
  Tensor v = net.eval(x, 0.4);
  // single-row evaluation equals the batched row
  for (std::size_t i = 0; i < 5; ++i) {
    Tensor row = Tensor::from({1, 2}, {x.at(2 * i), x.at(2 * i + 1)});
    Tensor vr = net.eval(row, 0.4);
    CHECK(vr.at(0) == v.at(2 * i));
    CHECK(vr.at(1) == v.at(2 * i + 1));
  }
  // permuting rows permutes outputs identically
  std::vector<double> perm_x(10);
  std::vector<std::size_t> order = {3, 0, 4, 1, 2};
  for (std::size_t i = 0; i < 5; ++i) {
    perm_x[2 * i] = x.at(2 * order[i]);
    perm_x[2 * i + 1] = x.at(2 * order[i] + 1);
  }
  Tensor vp = net.eval(Tensor::from({5, 2}, std::move(perm_x)), 0.4);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(vp.at(2 * i) == v.at(2 * order[i]));
    CHECK(vp.at(2 * i + 1) == v.at(2 * order[i] + 1));
  }
}

TEST_CASE("dimension mismatch is rejected") {
  VelocityNet net(small_cfg());
  net.init(1);
  CHECK_THROWS_AS(net.eval(Tensor::zeros({3, 5}), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(net.eval(Tensor::zeros({6}), 0.5), std::invalid_argument);
  std::vector<Tensor> short_bundle(net.params().begin(), net.params().end() - 1);
  CHECK_THROWS_AS(net.eval(short_bundle, Tensor::zeros({3, 2}), 0.5),
                  std::invalid_argument);
}

TEST_CASE("directional derivative w.r.t. x matches finite differences") {
  for (Activation act : {Activation::Silu, Activation::Tanh}) {
    VelocityNetConfig cfg = small_cfg();
    cfg.activation = act;
    VelocityNet net(cfg);
    net.init(19);
    auto xv = random_vec(6, 5, -1.0, 1.0);
    auto uv = random_vec(6, 6, -1.0, 1.0);
    auto wv = random_vec(6, 8, -1.0, 1.0);
    const double t = 0.3, h = 1e-6;

    // scalar probe: <w, J u> via FD of <w, v(x + s u)>
    auto probe = [&](double s) {
      std::vector<double> shifted(6);
      for (std::size_t i = 0; i < 6; ++i) shifted[i] = xv[i] + s * uv[i];
      Tensor v = net.eval(Tensor::from({3, 2}, shifted), t);
      double acc = 0.0;
      for (std::size_t i = 0; i < 6; ++i) acc += wv[i] * v.at(i);
      return acc;
    };
    double fd = (probe(h) - probe(-h)) / (2.0 * h);

    // same scalar via the tape: <J^T w, u>
    Tape tape;
    Tensor x = tape.watch(Tensor::from({3, 2}, xv));
    Tensor v = net.eval(net.params(), x, t);
    Tensor loss = dot(v, Tensor::from({3, 2}, wv));
    auto grads = tape.backward(loss);
    const auto& gx = *grads.at(x.node).data;
    double ad = 0.0;
    for (std::size_t i = 0; i < 6; ++i) ad += gx[i] * uv[i];

    CHECK(std::fabs(ad - fd) / (std::fabs(fd) + 1e-8) < 1e-5);
  }
}

TEST_CASE("attach routes gradients to every parameter") {
  VelocityNet net(small_cfg());
  net.init(23);
  Tape tape;
  auto P = net.attach(tape);
  Tensor x = Tensor::from({4, 2}, random_vec(8, 9, -1.0, 1.0));
  Tensor loss = sum(square(net.eval(P, x, 0.7)));
  auto grads = tape.backward(loss);
  for (const Tensor& p : P) CHECK(grads.count(p.node) == 1);
  // attached views share storage with the master parameters
  for (std::size_t i = 0; i < P.size(); ++i)
    CHECK(P[i].data.get() == net.params()[i].data.get());
}

TEST_CASE("Lipschitz smoke: difference quotients are finite and bounded") {
  VelocityNet net(small_cfg());
  net.init(42);
  Pcg64 rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    double t = rng.uniform();
    std::vector<double> a = {rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)};
    std::vector<double> b = {rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)};
    Tensor va = net.eval(Tensor::from({1, 2}, a), t);
    Tensor vb = net.eval(Tensor::from({1, 2}, b), t);
    double dv = std::hypot(va.at(0) - vb.at(0), va.at(1) - vb.at(1));
    double dx = std::hypot(a[0] - b[0], a[1] - b[1]);
    if (dx == 0.0) continue;
    double q = dv / dx;
    REQUIRE(std::isfinite(q));
    worst = std::max(worst, q);
  }
  MESSAGE("max difference quotient over 1000 pairs: ", worst);
  CHECK(worst < 1e6);  // sanity bound, not a Lipschitz constant claim
}
