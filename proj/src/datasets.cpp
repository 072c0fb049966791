#include "yflow/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace yflow {

void DatasetSpec::validate() const {
  if (kind == DatasetKind::BranchMixture) {
    if (n_branches == 0) throw config_error("branch mixture needs at least one branch");
    if (d < 2) throw config_error("branch mixture needs d >= 2");
    if (!(cluster_std > 0.0)) throw config_error("cluster std must be positive");
    if (!(target_x_min <= target_x_max))
      throw config_error("target x range is inverted");
  } else {
    if (csv_source.empty() || csv_target.empty())
      throw config_error("csv dataset needs both source and target paths");
  }
  if (samples_per_side == 0) throw config_error("samples_per_side must be positive");
}

std::vector<std::array<double, 2>> branch_centers(const DatasetSpec& spec) {
  std::vector<std::array<double, 2>> centers;
  const std::size_t k = spec.n_branches;
  if (k == 1) {
    centers.push_back({0.5 * (spec.target_x_min + spec.target_x_max), spec.target_y});
    return centers;
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(k - 1);
    centers.push_back({spec.target_x_min + frac * (spec.target_x_max - spec.target_x_min),
                       spec.target_y});
  }
  return centers;
}

MixtureSampler::MixtureSampler(const DatasetSpec& spec, Side side)
    : spec_(spec),
      side_(side),
      centers_(branch_centers(spec)),
      // Sides own disjoint streams so drawing from one never perturbs the other.
      rng_(spec.seed, side == Side::Source ? streams::kData : streams::kData + 1) {
  spec_.validate();
  if (spec_.kind != DatasetKind::BranchMixture)
    throw config_error("mixture sampler requires a branch-mixture spec");
}

SampleBatch MixtureSampler::draw(std::size_t n) {
  const std::size_t d = spec_.d;
  SampleBatch out;
  out.side = side_;
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 2> c = {spec_.source_center[0], spec_.source_center[1]};
    if (side_ == Side::Target) {
      const std::size_t b = static_cast<std::size_t>(rng_.bounded(centers_.size()));
      out.branch_labels.push_back(b);
      c = centers_[b];
    }
    v[i * d + 0] = c[0] + spec_.cluster_std * rng_.gaussian();
    v[i * d + 1] = c[1] + spec_.cluster_std * rng_.gaussian();
    for (std::size_t j = 2; j < d; ++j) v[i * d + j] = spec_.cluster_std * rng_.gaussian();
  }
  out.x = Tensor::from({n, d}, std::move(v));
  return out;
}

std::pair<MixtureSampler, MixtureSampler> make_branch_mixture(const DatasetSpec& spec) {
  return {MixtureSampler(spec, Side::Source), MixtureSampler(spec, Side::Target)};
}

Tensor parse_csv(const std::string& text, bool has_header) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::istringstream in(text);
  std::string line;
  bool skipped_header = !has_header;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    std::size_t start = 0, fields = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos
                                                      ? std::string::npos
                                                      : comma - start);
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw config_error("csv line " + std::to_string(lineno) + ": non-numeric cell '" +
                           cell + "'");
      }
      // Reject trailing junk that stod silently ignores.
      while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t')) ++used;
      if (used != cell.size())
        throw config_error("csv line " + std::to_string(lineno) + ": non-numeric cell '" +
                           cell + "'");
      values.push_back(x);
      ++fields;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cols == 0)
      cols = fields;
    else if (fields != cols)
      throw config_error("csv line " + std::to_string(lineno) + ": expected " +
                         std::to_string(cols) + " fields, got " + std::to_string(fields));
    ++rows;
  }
  if (rows == 0) throw config_error("csv contains no data rows");
  return Tensor::from({rows, cols}, std::move(values));
}

Tensor load_csv_file(const std::string& path, bool has_header) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot open csv file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), has_header);
}

void save_csv(const std::string& path, const Tensor& x,
              const std::vector<std::string>& header) {
  if (x.rank() != 2) throw std::invalid_argument("save_csv: need a [n, d] tensor");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot write csv file '" + path + "'");
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      f << (j ? "," : "") << header[j];
    f << "\n";
  }
  char buf[40];
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", x.at(i * x.cols() + j));
      f << (j ? "," : "") << buf;
    }
    f << "\n";
  }
  if (!f) throw config_error("short write to csv file '" + path + "'");
}

void standardize_columns(Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x.at(i * d + j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = x.at(i * d + j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double s = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < n; ++i)
      x.vals()[i * d + j] = (x.at(i * d + j) - mean) / s;
  }
}

std::pair<SampleBatch, SampleBatch> load_csv(const DatasetSpec& spec) {
  spec.validate();
  if (spec.kind != DatasetKind::Csv)
    throw config_error("load_csv requires a csv dataset spec");
  Tensor src = load_csv_file(spec.csv_source, spec.csv_has_header);
  Tensor tgt = load_csv_file(spec.csv_target, spec.csv_has_header);
  if (src.cols() != tgt.cols())
    throw config_error("csv width mismatch: source has " + std::to_string(src.cols()) +
                       " columns, target has " + std::to_string(tgt.cols()));
  if (spec.csv_standardize) {
    standardize_columns(src);
    standardize_columns(tgt);
  }
  SampleBatch a, b;
  a.x = src;
  a.side = Side::Source;
  b.x = tgt;
  b.side = Side::Target;
  return {a, b};
}

std::pair<SampleBatch, SampleBatch> train_test_split(const SampleBatch& batch,
                                                     double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw config_error("split fraction must lie strictly between 0 and 1");
  const std::size_t n = batch.x.rows(), d = batch.x.cols();
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n)
    throw config_error("split leaves an empty side (" + std::to_string(n_train) + "/" +
                       std::to_string(n - n_train) + ")");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Pcg64 rng(seed, streams::kData + 2);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.bounded(i)]);

  auto take = [&](std::size_t lo, std::size_t hi) {
    SampleBatch out;
    out.side = batch.side;
    std::vector<double> v((hi - lo) * d);
    for (std::size_t r = lo; r < hi; ++r) {
      for (std::size_t j = 0; j < d; ++j) v[(r - lo) * d + j] = batch.x.at(idx[r] * d + j);
      if (!batch.branch_labels.empty())
        out.branch_labels.push_back(batch.branch_labels[idx[r]]);
    }
    out.x = Tensor::from({hi - lo, d}, std::move(v));
    return out;
  };
  return {take(0, n_train), take(n_train, n)};
}

}  // namespace yflow
