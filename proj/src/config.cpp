#include "yflow/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace yflow {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': cannot parse number from '" + v + "'");
  }
  if (used != v.size())
    throw config_error("config key '" + key + "': cannot parse number from '" + v + "'");
  return x;
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) +
                         ": expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw config_error("config line " + std::to_string(lineno) + ": empty key");
    if (value.empty())
      throw config_error("config line " + std::to_string(lineno) + ": empty value for '" +
                         key + "'");
    if (!cfg.entries_.emplace(key, value).second)
      throw config_error("duplicate config key '" + key + "'");
  }
  return cfg;
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) {
  consumed_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::string KvConfig::require_str(const std::string& key) {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) throw config_error("missing required config key '" + key + "'");
  return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) {
  consumed_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_double(key, it->second);
}

std::size_t KvConfig::get_size(const std::string& key, std::size_t fallback) {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const double x = parse_double(key, it->second);
  if (x < 0.0 || x != static_cast<double>(static_cast<std::size_t>(x)))
    throw config_error("config key '" + key + "': expected a nonnegative integer, got '" +
                       it->second + "'");
  return static_cast<std::size_t>(x);
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing junk");
    return x;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': expected an unsigned integer, got '" +
                       it->second + "'");
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw config_error("config key '" + key + "': expected true or false, got '" + it->second +
                     "'");
}

void KvConfig::reject_unknown() const {
  std::string bad;
  for (const auto& [key, value] : entries_) {
    (void)value;
    if (!consumed_.count(key)) bad += (bad.empty() ? "" : ", ") + ("'" + key + "'");
  }
  if (!bad.empty()) throw config_error("unknown config key(s): " + bad);
}

Method method_from_string(const std::string& s) {
  if (s == "yflow") return Method::Yflow;
  if (s == "yflow-sobolev") return Method::YflowSobolev;
  if (s == "yflow-mm") return Method::YflowMm;
  if (s == "fm") return Method::Fm;
  if (s == "cfm") return Method::Cfm;
  if (s == "ot-cfm") return Method::OtCfm;
  throw config_error("unknown method '" + s +
                     "' (expected yflow, yflow-sobolev, yflow-mm, fm, cfm, or ot-cfm)");
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::Yflow: return "yflow";
    case Method::YflowSobolev: return "yflow-sobolev";
    case Method::YflowMm: return "yflow-mm";
    case Method::Fm: return "fm";
    case Method::Cfm: return "cfm";
    case Method::OtCfm: return "ot-cfm";
  }
  return "?";
}

RunConfig RunConfig::from_text(const std::string& text) {
  KvConfig kv = KvConfig::parse(text);
  RunConfig rc;
  rc.config_text = text;

  rc.method = method_from_string(kv.get_str("method", "yflow"));
  rc.output_dir = kv.get_str("run.output-dir", rc.output_dir);
  rc.grid_steps = kv.get_size("grid.steps", rc.grid_steps);

  rc.opt.lr = kv.get_double("opt.lr", rc.opt.lr);
  rc.opt.batch_size = kv.get_size("opt.batch-size", rc.opt.batch_size);
  rc.opt.iterations = kv.get_size("opt.iterations", rc.opt.iterations);
  rc.opt.beta1 = kv.get_double("opt.beta1", rc.opt.beta1);
  rc.opt.beta2 = kv.get_double("opt.beta2", rc.opt.beta2);
  rc.opt.checkpoint_every = kv.get_size("opt.checkpoint-every", rc.opt.checkpoint_every);
  rc.opt.grad_clip = kv.get_double("opt.grad-clip", rc.opt.grad_clip);

  rc.sinkhorn.epsilon = kv.get_double("sinkhorn.epsilon", 0.0);
  rc.sinkhorn.iterations = kv.get_size("sinkhorn.iterations", 20);

  rc.action.alpha = kv.get_double("action.alpha", rc.action.alpha);
  rc.action.delta = kv.get_double("action.delta", rc.action.delta);
  rc.action.lambda_sinkhorn = kv.get_double("action.lambda-sinkhorn", rc.action.lambda_sinkhorn);
  rc.action.lambda_sobolev = kv.get_double("action.lambda-sobolev", rc.action.lambda_sobolev);
  rc.action.hutchinson_probes = kv.get_size("action.hutchinson-probes", rc.action.hutchinson_probes);
  const int mm_present = static_cast<int>(kv.has("action.mm-epsilon")) +
                         static_cast<int>(kv.has("action.mm-gamma1")) +
                         static_cast<int>(kv.has("action.mm-gamma2"));
  if (mm_present != 0 && mm_present != 3)
    throw config_error(
        "action.mm-epsilon, action.mm-gamma1 and action.mm-gamma2 must be given together");
  rc.action.has_mm = mm_present == 3;
  rc.action.mm_epsilon = kv.get_double("action.mm-epsilon", 0.0);
  rc.action.mm_gamma1 = kv.get_double("action.mm-gamma1", 0.0);
  rc.action.mm_gamma2 = kv.get_double("action.mm-gamma2", 0.0);
  rc.action.mm_lambda_energy = kv.get_double("action.mm-lambda-energy", 1.0);

  // The cfm baseline defaults to a genuinely noisy bridge; fm and ot-cfm stay
  // on the deterministic interpolant unless overridden.
  rc.fm_sigma = kv.get_double("fm.sigma", rc.method == Method::Cfm ? 0.1 : 0.0);

  rc.net.hidden_width = kv.get_size("net.hidden-width", rc.net.hidden_width);
  rc.net.hidden_layers = kv.get_size("net.hidden-layers", rc.net.hidden_layers);
  const std::string act = kv.get_str("net.activation", "silu");
  if (act == "silu")
    rc.net.activation = Activation::Silu;
  else if (act == "tanh")
    rc.net.activation = Activation::Tanh;
  else
    throw config_error("net.activation must be silu or tanh, got '" + act + "'");
  rc.net.time_embed_dim = kv.get_size("net.time-embed-dim", rc.net.time_embed_dim);
  const std::string emb = kv.get_str("net.time-embed", "learned");
  if (emb == "learned")
    rc.net.time_embed_kind = TimeEmbedKind::LearnedLinear;
  else if (emb == "sinusoidal")
    rc.net.time_embed_kind = TimeEmbedKind::Sinusoidal;
  else
    throw config_error("net.time-embed must be learned or sinusoidal, got '" + emb + "'");

  const std::string kind = kv.get_str("data.kind", "branch-mixture");
  if (kind == "branch-mixture")
    rc.data.kind = DatasetKind::BranchMixture;
  else if (kind == "csv")
    rc.data.kind = DatasetKind::Csv;
  else
    throw config_error("data.kind must be branch-mixture or csv, got '" + kind + "'");
  rc.data.d = kv.get_size("data.dim", rc.data.d);
  rc.data.n_branches = kv.get_size("data.branches", rc.data.n_branches);
  rc.data.samples_per_side = kv.get_size("data.samples-per-side", rc.data.samples_per_side);
  rc.data.cluster_std = kv.get_double("data.cluster-std", rc.data.cluster_std);
  rc.data.source_center[0] = kv.get_double("data.source-center-x", rc.data.source_center[0]);
  rc.data.source_center[1] = kv.get_double("data.source-center-y", rc.data.source_center[1]);
  rc.data.target_y = kv.get_double("data.target-y", rc.data.target_y);
  rc.data.target_x_min = kv.get_double("data.target-x-min", rc.data.target_x_min);
  rc.data.target_x_max = kv.get_double("data.target-x-max", rc.data.target_x_max);
  rc.data.csv_source = kv.get_str("data.csv-source", "");
  rc.data.csv_target = kv.get_str("data.csv-target", "");
  rc.data.csv_has_header = kv.get_bool("data.csv-header", false);
  rc.data.csv_standardize = kv.get_bool("data.csv-standardize", false);

  rc.seed_init = kv.get_u64("seed.init", rc.seed_init);
  rc.seed_data = kv.get_u64("seed.data", rc.seed_data);
  rc.seed_train = kv.get_u64("seed.train", rc.seed_train);
  rc.data.seed = rc.seed_data;

  kv.reject_unknown();
  rc.validate();
  return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

void RunConfig::validate() const {
  data.validate();
  // Net dim is resolved from the dataset later; validate the rest.
  VelocityNetConfig probe = net;
  probe.dim = data.kind == DatasetKind::BranchMixture ? data.d : 1;
  probe.validate();
  action.validate();
  if (grid_steps < 1) throw config_error("grid.steps must be >= 1");
  if (opt.lr < 0.0) throw config_error("opt.lr must be >= 0");
  if (opt.batch_size < 1) throw config_error("opt.batch-size must be >= 1");
  if (!(opt.beta1 >= 0.0 && opt.beta1 < 1.0) || !(opt.beta2 >= 0.0 && opt.beta2 < 1.0))
    throw config_error("Adam betas must lie in [0, 1)");
  if (!(opt.grad_clip >= 0.0) || !std::isfinite(opt.grad_clip))
    throw config_error("opt.grad-clip must be finite and >= 0");
  if (sinkhorn.iterations < 1) throw config_error("sinkhorn.iterations must be >= 1");
  if (fm_sigma < 0.0) throw config_error("fm.sigma must be >= 0");
  if (output_dir.empty()) throw config_error("run.output-dir must not be empty");
  if (method == Method::YflowSobolev && !(action.lambda_sobolev > 0.0))
    throw config_error("method yflow-sobolev requires action.lambda-sobolev > 0");
  if (method == Method::YflowMm && !action.has_mm)
    throw config_error("method yflow-mm requires the action.mm-* constants");
}

}  // namespace yflow
