#include "yflow/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "yflow/rng.hpp"
#include "yflow/threads.hpp"

namespace yflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_points(const Tensor& X, const char* who) {
  if (X.rank() != 2 || X.shape[0] == 0)
    throw std::invalid_argument(std::string(who) + ": nonempty [n, d] tensor required");
}

// Deterministic total order on tensor contents, used to canonicalize symmetric
// two-sample statistics.
bool tensor_less(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return a.shape < b.shape;
  return std::lexicographical_compare(a.data->begin(), a.data->end(),
                                      b.data->begin(), b.data->end());
}

double lse(const std::vector<double>& z) {
  double mx = -kInf;
  for (double v : z) mx = std::max(mx, v);
  if (mx == -kInf) return -kInf;
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s);
}

// One entropic OT value on the tape: equal weights 1/m, 1/n.
Tensor sinkhorn_value_taped(const Tensor& A, const Tensor& B, double epsilon,
                            std::size_t iterations) {
  std::size_t m = A.shape[0], n = B.shape[0];
  double logm = std::log(static_cast<double>(m));
  double logn = std::log(static_cast<double>(n));
  Tensor C = pairwise_sqdist(A, B);
  Tensor negC = scale(C, -1.0);
  Tensor f = Tensor::zeros({m});
  Tensor g = Tensor::zeros({n});
  for (std::size_t it = 0; it < iterations; ++it) {
    Tensor lr = lse_rows(scale(add_rowvec(negC, g), 1.0 / epsilon));
    f = scale(add_scalar(lr, -logn), -epsilon);
    Tensor lc = lse_cols(scale(add_colvec(negC, f), 1.0 / epsilon));
    g = scale(add_scalar(lc, -logm), -epsilon);
  }
  Tensor logplan = add_scalar(
      scale(add_colvec(add_rowvec(negC, g), f), 1.0 / epsilon), -logm - logn);
  return dot(exp_t(logplan), C);
}

}  // namespace

Tensor cost_matrix(const Tensor& X, const Tensor& Y, int p) {
  require_points(X, "cost_matrix");
  require_points(Y, "cost_matrix");
  if (X.shape[1] != Y.shape[1])
    throw std::invalid_argument("cost_matrix: dimension mismatch " +
                                shape_str(X.shape) + " vs " + shape_str(Y.shape));
  if (p != 1 && p != 2) throw std::invalid_argument("cost_matrix: p must be 1 or 2");
  std::size_t m = X.shape[0], n = Y.shape[0], d = X.shape[1];
  Tensor C = Tensor::zeros({m, n});
  const auto& xv = *X.data;
  const auto& yv = *Y.data;
  auto& cv = *C.data;
  parallel_for(m, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        double diff = xv[i * d + c] - yv[j * d + c];
        s += diff * diff;
      }
      cv[i * n + j] = p == 2 ? s : std::sqrt(s);
    }
  });
  return C;
}

double auto_epsilon(const Tensor& C, double factor) {
  double s = 0.0;
  for (double v : *C.data) s += v;
  double eps = factor * s / static_cast<double>(C.numel());
  return eps > 0.0 ? eps : 1e-6;
}

SinkhornResult sinkhorn_ot(const std::vector<double>& a, const std::vector<double>& b,
                           const Tensor& C, double epsilon, std::size_t iterations) {
  if (C.rank() != 2) throw std::invalid_argument("sinkhorn_ot: cost must be [m, n]");
  std::size_t m = C.shape[0], n = C.shape[1];
  if (a.size() != m || b.size() != n)
    throw std::invalid_argument("sinkhorn_ot: marginal sizes do not match the cost");
  auto check_marginal = [](const std::vector<double>& w, const char* name) {
    double s = 0.0;
    for (double v : w) {
      if (!(v > 0.0))
        throw std::invalid_argument(std::string("sinkhorn_ot: ") + name +
                                    " entries must be positive");
      s += v;
    }
    if (std::fabs(s - 1.0) > 1e-9)
      throw std::invalid_argument(std::string("sinkhorn_ot: ") + name +
                                  " must sum to 1");
  };
  check_marginal(a, "a");
  check_marginal(b, "b");
  if (!(epsilon > 0.0)) throw std::invalid_argument("sinkhorn_ot: epsilon must be > 0");
  if (iterations < 1) throw std::invalid_argument("sinkhorn_ot: iterations must be >= 1");
  if (!all_finite(C)) throw numeric_error("sinkhorn_ot: non-finite cost entries");

  const auto& cv = *C.data;
  std::vector<double> loga(m), logb(n);
  for (std::size_t i = 0; i < m; ++i) loga[i] = std::log(a[i]);
  for (std::size_t j = 0; j < n; ++j) logb[j] = std::log(b[j]);

  std::vector<double> f(m, 0.0), g(n, 0.0), row(n), col(m);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        row[j] = (g[j] - cv[i * n + j]) / epsilon + logb[j];
      f[i] = -epsilon * lse(row);
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < m; ++i)
        col[i] = (f[i] - cv[i * n + j]) / epsilon + loga[i];
      g[j] = -epsilon * lse(col);
    }
  }

  SinkhornResult res;
  res.f = f;
  res.g = g;
  res.plan = Tensor::zeros({m, n});
  auto& pv = *res.plan.data;
  double value = 0.0, total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double rowsum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double lp = loga[i] + logb[j] + (f[i] + g[j] - cv[i * n + j]) / epsilon;
      double p = std::exp(lp);
      pv[i * n + j] = p;
      rowsum += p;
      value += p * cv[i * n + j];
    }
    total += rowsum;
    res.max_row_violation = std::max(res.max_row_violation, std::fabs(rowsum - a[i]));
  }
  for (std::size_t j = 0; j < n; ++j) {
    double colsum = 0.0;
    for (std::size_t i = 0; i < m; ++i) colsum += pv[i * n + j];
    res.max_col_violation = std::max(res.max_col_violation, std::fabs(colsum - b[j]));
  }
  res.value = value;
  res.plan_sum = total;
  return res;
}

Tensor sinkhorn_divergence(const Tensor& X, const Tensor& Y, double epsilon,
                           std::size_t iterations) {
  require_points(X, "sinkhorn_divergence");
  require_points(Y, "sinkhorn_divergence");
  if (X.shape[1] != Y.shape[1])
    throw std::invalid_argument("sinkhorn_divergence: dimension mismatch");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("sinkhorn_divergence: epsilon must be > 0");
  if (iterations < 1)
    throw std::invalid_argument("sinkhorn_divergence: iterations must be >= 1");
  // Canonical argument order makes S(X,Y) and S(Y,X) literally the same
  // computation (the cost is symmetric, so the value is unaffected).
  const Tensor& A = tensor_less(Y, X) ? Y : X;
  const Tensor& B = tensor_less(Y, X) ? X : Y;
  Tensor xy = sinkhorn_value_taped(A, B, epsilon, iterations);
  Tensor xx = sinkhorn_value_taped(A, A, epsilon, iterations);
  Tensor yy = sinkhorn_value_taped(B, B, epsilon, iterations);
  return sub(xy, add(scale(xx, 0.5), scale(yy, 0.5)));
}

std::vector<std::size_t> solve_assignment(const Tensor& C) {
  if (C.rank() != 2 || C.shape[0] != C.shape[1])
    throw std::invalid_argument("solve_assignment: square cost required");
  const std::size_t n = C.shape[0];
  const auto& cv = *C.data;
  // Shortest augmenting paths with potentials (1-indexed scratch arrays).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cv[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> sigma(n);
  for (std::size_t j = 1; j <= n; ++j) sigma[p[j] - 1] = j - 1;
  return sigma;
}

std::vector<std::size_t> brute_force_assignment(const Tensor& C) {
  if (C.rank() != 2 || C.shape[0] != C.shape[1])
    throw std::invalid_argument("brute_force_assignment: square cost required");
  const std::size_t n = C.shape[0];
  if (n > 8) throw std::invalid_argument("brute_force_assignment: n must be <= 8");
  std::vector<std::size_t> sigma(n), best(n);
  std::iota(sigma.begin(), sigma.end(), 0);
  best = sigma;
  double best_cost = assignment_cost(C, sigma);
  while (std::next_permutation(sigma.begin(), sigma.end())) {
    double c = assignment_cost(C, sigma);
    if (c < best_cost) {
      best_cost = c;
      best = sigma;
    }
  }
  return best;
}

double assignment_cost(const Tensor& C, const std::vector<std::size_t>& sigma) {
  const std::size_t n = C.shape[0];
  const auto& cv = *C.data;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += cv[i * C.shape[1] + sigma[i]];
  return s;
}

double exact_wasserstein(const Tensor& X, const Tensor& Y, int p) {
  require_points(X, "exact_wasserstein");
  require_points(Y, "exact_wasserstein");
  if (X.shape[0] != Y.shape[0])
    throw std::invalid_argument("exact_wasserstein: sample sizes differ (" +
                                std::to_string(X.shape[0]) + " vs " +
                                std::to_string(Y.shape[0]) + ")");
  std::size_t n = X.shape[0];
  if (n > 4096)
    throw std::invalid_argument("exact_wasserstein: n > 4096; subsample first");
  Tensor C = cost_matrix(X, Y, p);
  auto sigma = n <= 8 ? brute_force_assignment(C) : solve_assignment(C);
  double cost = assignment_cost(C, sigma) / static_cast<double>(n);
  return p == 1 ? cost : std::sqrt(cost);
}

double rbf_mmd(const Tensor& X, const Tensor& Y, double bandwidth) {
  require_points(X, "rbf_mmd");
  require_points(Y, "rbf_mmd");
  if (X.shape[1] != Y.shape[1]) throw std::invalid_argument("rbf_mmd: dimension mismatch");
  if (X.shape[0] < 2 || Y.shape[0] < 2)
    throw std::invalid_argument("rbf_mmd: unbiased estimator needs >= 2 points per side");

  // Canonical order keeps the value bitwise symmetric under argument swap.
  const Tensor& A = tensor_less(Y, X) ? Y : X;
  const Tensor& B = tensor_less(Y, X) ? X : Y;
  const std::size_t m = A.shape[0], n = B.shape[0], d = A.shape[1];
  const auto& av = *A.data;
  const auto& bv = *B.data;

  auto sqdist = [&](const std::vector<double>& u, std::size_t i,
                    const std::vector<double>& w, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double diff = u[i * d + c] - w[j * d + c];
      s += diff * diff;
    }
    return s;
  };

  double h = bandwidth;
  if (!(h > 0.0)) {
    // median pairwise distance of the pooled sample
    std::vector<double> dists;
    dists.reserve((m + n) * (m + n - 1) / 2);
    auto at = [&](std::size_t i, std::size_t c) {
      return i < m ? av[i * d + c] : bv[(i - m) * d + c];
    };
    for (std::size_t i = 0; i < m + n; ++i)
      for (std::size_t j = i + 1; j < m + n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          double diff = at(i, c) - at(j, c);
          s += diff * diff;
        }
        dists.push_back(std::sqrt(s));
      }
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    h = dists[dists.size() / 2];
    if (!(h > 0.0)) h = 1.0;
  }
  const double inv = -1.0 / (2.0 * h * h);

  double sa = 0.0, sb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) sa += std::exp(inv * sqdist(av, i, av, j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sb += std::exp(inv * sqdist(bv, i, bv, j));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) sab += std::exp(inv * sqdist(av, i, bv, j));

  double mm = static_cast<double>(m), nn = static_cast<double>(n);
  double mmd2 = 2.0 * sa / (mm * (mm - 1.0)) + 2.0 * sb / (nn * (nn - 1.0)) -
                2.0 * sab / (mm * nn);
  return std::sqrt(std::max(mmd2, 0.0));
}

std::vector<std::size_t> minibatch_ot_coupling(const Tensor& X0, const Tensor& X1) {
  require_points(X0, "minibatch_ot_coupling");
  require_points(X1, "minibatch_ot_coupling");
  if (X0.shape[0] != X1.shape[0] || X0.shape[1] != X1.shape[1])
    throw std::invalid_argument("minibatch_ot_coupling: batch shapes differ");
  return solve_assignment(cost_matrix(X0, X1, 2));
}

Tensor subsample_rows(const Tensor& X, std::size_t cap, std::uint64_t seed) {
  require_points(X, "subsample_rows");
  std::size_t n = X.shape[0], d = X.shape[1];
  if (n <= cap) return X;
  // Partial Fisher-Yates over the index array, then restore original order.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Pcg64 rng(seed, streams::kSample);
  for (std::size_t i = 0; i < cap; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<double> out(cap * d);
  for (std::size_t i = 0; i < cap; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = X.at(idx[i] * d + c);
  return Tensor::from({cap, d}, std::move(out));
}

}  // namespace yflow
