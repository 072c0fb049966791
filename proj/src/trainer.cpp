#include "yflow/trainer.hpp"

#include <cmath>
#include <string>

#include "yflow/flow_matching.hpp"
#include "yflow/objectives.hpp"
#include "yflow/ot.hpp"

namespace yflow {

void Adam::step(std::vector<Tensor>& master, const std::vector<Tensor>& taped,
                const std::unordered_map<int, Tensor>& grads) {
  if (taped.size() != master.size())
    throw std::invalid_argument("Adam::step: parameter bundle mismatch");
  if (m_.empty()) {
    for (const Tensor& p : master) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }
  ++t_;
  double scale = 1.0;
  if (oc_.grad_clip > 0.0) {
    double q = 0.0;
    for (std::size_t j = 0; j < master.size(); ++j) {
      auto it = grads.find(taped[j].node);
      if (it == grads.end()) continue;
      for (double g : it->second.vals()) q += g * g;
    }
    const double norm = std::sqrt(q);
    if (norm > oc_.grad_clip) scale = oc_.grad_clip / norm;
  }
  const double bc1 = 1.0 - std::pow(oc_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(oc_.beta2, static_cast<double>(t_));
  constexpr double kEps = 1e-8;
  for (std::size_t j = 0; j < master.size(); ++j) {
    auto it = grads.find(taped[j].node);
    const std::vector<double>* g = it == grads.end() ? nullptr : &it->second.vals();
    std::vector<double>& p = master[j].vals();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = (g ? (*g)[i] : 0.0) * scale;
      m_[j][i] = oc_.beta1 * m_[j][i] + (1.0 - oc_.beta1) * gi;
      v_[j][i] = oc_.beta2 * v_[j][i] + (1.0 - oc_.beta2) * gi * gi;
      const double mhat = m_[j][i] / bc1;
      const double vhat = v_[j][i] / bc2;
      p[i] -= oc_.lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

BatchProvider::BatchProvider(const DatasetSpec& spec, std::uint64_t seed)
    : spec_(spec), idx_rng_(seed, streams::kData + 3) {
  spec_.seed = seed;
  spec_.validate();
  if (spec_.kind == DatasetKind::BranchMixture) {
    samplers_.emplace_back(spec_, Side::Source);
    samplers_.emplace_back(spec_, Side::Target);
    d_ = spec_.d;
  } else {
    auto [src, tgt] = load_csv(spec_);
    pool_src_ = src.x;
    pool_tgt_ = tgt.x;
    d_ = pool_src_.cols();
  }
}

Tensor BatchProvider::draw(Side side, std::size_t n) {
  if (spec_.kind == DatasetKind::BranchMixture)
    return samplers_[side == Side::Source ? 0 : 1].draw(n).x;
  const Tensor& pool = side == Side::Source ? pool_src_ : pool_tgt_;
  const std::size_t rows = pool.rows();
  std::vector<double> v(n * d_);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = idx_rng_.bounded(rows);
    for (std::size_t j = 0; j < d_; ++j) v[i * d_ + j] = pool.at(r * d_ + j);
  }
  return Tensor::from({n, d_}, std::move(v));
}

double resolve_epsilon(const RunConfig& cfg, BatchProvider&) {
  if (cfg.sinkhorn.epsilon > 0.0) return cfg.sinkhorn.epsilon;
  // Fresh provider: probing must not advance the training data streams.
  BatchProvider probe(cfg.data, cfg.seed_data);
  const std::size_t n = std::min<std::size_t>(cfg.opt.batch_size, 512);
  Tensor a = probe.draw(Side::Source, n);
  Tensor b = probe.draw(Side::Target, n);
  return auto_epsilon(cost_matrix(a, b, 2));
}

namespace {

Checkpoint make_checkpoint(const RunConfig& cfg, const VelocityNet& net,
                           std::uint64_t iteration, const LossStats& stats) {
  Checkpoint ckpt;
  ckpt.config_text = cfg.config_text;
  ckpt.iteration = iteration;
  for (const Tensor& p : net.params())
    ckpt.params.push_back(Tensor::from(p.shape, p.vals()));  // deep copy
  ckpt.stats = stats;
  return ckpt;
}

}  // namespace

TrainResult train_run(const RunConfig& cfg, const CheckpointSink& sink) {
  cfg.validate();
  BatchProvider data(cfg.data, cfg.seed_data);
  VelocityNetConfig nc = cfg.net;
  nc.dim = data.dim();
  VelocityNet net(nc);
  net.init(cfg.seed_init);

  const double eps = resolve_epsilon(cfg, data);
  const SinkhornParams sp{eps, cfg.sinkhorn.iterations};
  Adam adam(cfg.opt);
  Pcg64 train_rng(cfg.seed_train, streams::kTrain);
  Pcg64 probe_rng(cfg.seed_train, streams::kProbe);
  const TimeGrid grid = TimeGrid::uniform(cfg.grid_steps);

  std::vector<LossRow> rows;
  LossStats stats;
  for (std::uint64_t iter = 1; iter <= cfg.opt.iterations; ++iter) {
    Tensor xb = data.draw(Side::Source, cfg.opt.batch_size);
    Tensor yb = data.draw(Side::Target, cfg.opt.batch_size);
    LossRow row;
    row.iteration = iter;
    try {
      Tape tape;
      std::vector<Tensor> P = net.attach(tape);
      Tensor total;
      if (cfg.is_baseline()) {
        const CouplingMode mode =
            cfg.method == Method::OtCfm ? CouplingMode::Ot : CouplingMode::Independent;
        PairBatch pairs = make_pairs(xb, yb, mode, train_rng);
        MultiField f = [&](const Tensor& x, const std::vector<double>& t) {
          return net.eval_multi(P, x, t);
        };
        total = cfm_loss(f, pairs, cfg.fm_sigma, train_rng);
        row.total = total.value();
      } else {
        FieldFn f = [&](const Tensor& x, double t) { return net.eval(P, x, t); };
        LossBreakdown lb = cfg.method == Method::YflowMm
                               ? mm_total_loss(f, xb, yb, grid, cfg.action, sp, probe_rng)
                               : total_loss(f, xb, yb, grid, cfg.action, sp, probe_rng);
        total = lb.total;
        row.total = lb.total.value();
        row.action = lb.action;
        row.sinkhorn = lb.sinkhorn;
        row.sobolev = lb.sobolev;
      }
      if (!std::isfinite(row.total)) throw numeric_error("non-finite loss value");
      auto grads = tape.backward(total);
      adam.step(net.params(), P, grads);
    } catch (const numeric_error& e) {
      throw numeric_error("iteration " + std::to_string(iter) + ": " + e.what());
    }
    rows.push_back(row);
    stats.rows = iter;
    stats.last_total = row.total;
    stats.last_action = row.action;
    stats.last_sinkhorn = row.sinkhorn;
    stats.last_sobolev = row.sobolev;
    stats.best_total = iter == 1 ? row.total : std::min(stats.best_total, row.total);
    if (sink && cfg.opt.checkpoint_every > 0 && iter % cfg.opt.checkpoint_every == 0 &&
        iter != cfg.opt.iterations)
      sink(make_checkpoint(cfg, net, iter, stats));
  }

  Checkpoint final_ckpt = make_checkpoint(cfg, net, cfg.opt.iterations, stats);
  return TrainResult{std::move(net), std::move(rows), eps, stats, std::move(final_ckpt)};
}

}  // namespace yflow
