#include "upsilon/sec_clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "upsilon/kernels.hpp"

namespace upsilon {

void SinkhornConfig::validate() const {
  if (!(reg > 0.0)) throw std::invalid_argument("sinkhorn reg must be positive");
  if (max_iters < 1) throw std::invalid_argument("sinkhorn max_iters must be >= 1");
  if (!(marginal_tol > 0.0)) throw std::invalid_argument("sinkhorn marginal_tol must be positive");
}

double max_marginal_violation(const Matrix& q) {
  if (q.empty()) return 0.0;
  const auto& kern = kernels::active();
  const double row_target = 1.0 / static_cast<double>(q.rows());
  const double col_target = 1.0 / static_cast<double>(q.cols());
  double worst = 0.0;
  std::vector<double> col_sums(q.cols(), 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    worst = std::max(worst, std::abs(kern.sum(q.row(i).data(), q.cols()) - row_target));
    kern.axpy(1.0, q.row(i).data(), col_sums.data(), q.cols());
  }
  for (double s : col_sums) worst = std::max(worst, std::abs(s - col_target));
  return worst;
}

AssignmentMatrix::AssignmentMatrix(Matrix q) : q_(std::move(q)) {
  if (q_.rows() == 0 || q_.cols() == 0) throw DimensionError("assignment matrix must be non-empty");
  for (double v : q_.data()) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("assignment matrix has a negative or non-finite entry");
  }
  const double violation = max_marginal_violation(q_);
  if (violation > kMarginalTolerance) {
    throw std::invalid_argument("assignment matrix marginals off by " + std::to_string(violation));
  }
}

ExtraPosteriors normalize_extra(const PredictionMatrix& p, const LabelSpace& ls,
                                std::span<const std::size_t> subset) {
  if (ls.k_extra() == 0) throw std::invalid_argument("normalize_extra needs at least one extra class");
  if (subset.empty()) throw std::invalid_argument("normalize_extra needs a non-empty sample subset");
  if (p.cols() != ls.total()) throw DimensionError("prediction matrix width differs from label space");

  const std::size_t k = ls.k_extra();
  ExtraPosteriors out{Matrix(k, subset.size()), {}};
  std::vector<double> column(k);
  for (std::size_t j = 0; j < subset.size(); ++j) {
    if (subset[j] >= p.rows()) throw DimensionError("subset sample index out of range");
    const auto extra = p.row(subset[j]).subspan(ls.k_id(), k);
    const double mass = std::accumulate(extra.begin(), extra.end(), 0.0);
    if (mass <= 0.0) out.zero_mass.push_back(subset[j]);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double normalized = mass > 0.0 ? extra[i] / mass : 0.0;
      column[i] = std::max(normalized, kExtraProbabilityFloor);
      total += column[i];
    }
    for (std::size_t i = 0; i < k; ++i) out.p(i, j) = column[i] / total;
  }
  return out;
}

Matrix round_to_polytope(Matrix q) {
  const std::size_t k = q.rows();
  const std::size_t m = q.cols();
  const auto& kern = kernels::active();
  const double row_target = 1.0 / static_cast<double>(k);
  const double col_target = 1.0 / static_cast<double>(m);

  for (std::size_t i = 0; i < k; ++i) {
    const double s = kern.sum(q.row(i).data(), m);
    if (s > row_target) kern.scale(row_target / s, q.row(i).data(), m);
  }
  std::vector<double> col_sums(m, 0.0);
  for (std::size_t i = 0; i < k; ++i) kern.axpy(1.0, q.row(i).data(), col_sums.data(), m);
  std::vector<double> col_scale(m);
  for (std::size_t j = 0; j < m; ++j) col_scale[j] = col_sums[j] > col_target ? col_target / col_sums[j] : 1.0;
  for (std::size_t i = 0; i < k; ++i) kern.scaled_product(1.0, q.row(i).data(), col_scale.data(), q.row(i).data(), m);

  std::vector<double> row_err(k);
  std::vector<double> col_err(m, col_target);
  for (std::size_t i = 0; i < k; ++i) {
    row_err[i] = std::max(0.0, row_target - kern.sum(q.row(i).data(), m));
    kern.axpy(-1.0, q.row(i).data(), col_err.data(), m);
  }
  for (double& e : col_err) e = std::max(0.0, e);
  const double err_mass = std::accumulate(row_err.begin(), row_err.end(), 0.0);
  if (err_mass > 0.0) {
    for (std::size_t i = 0; i < k; ++i) kern.axpy(row_err[i] / err_mass, col_err.data(), q.row(i).data(), m);
  }
  return q;
}

SinkhornResult sinkhorn_assign(const Matrix& p, const SinkhornConfig& cfg) {
  cfg.validate();
  const std::size_t k = p.rows();
  const std::size_t m = p.cols();
  if (k == 0 || m == 0) throw DimensionError("sinkhorn needs K >= 1 and M >= 1");
  const auto& kern = kernels::active();

  // Kernel P^reg with every column divided by its largest entry first; the
  // column scaling is absorbed by the column potentials.
  Matrix kernel(k, m);
  for (std::size_t j = 0; j < m; ++j) {
    double col_max = 0.0;
    for (std::size_t i = 0; i < k; ++i) col_max = std::max(col_max, std::max(p(i, j), kExtraProbabilityFloor));
    for (std::size_t i = 0; i < k; ++i) {
      kernel(i, j) = std::exp(cfg.reg * std::log(std::max(p(i, j), kExtraProbabilityFloor) / col_max));
    }
  }

  const double row_target = 1.0 / static_cast<double>(k);
  const double col_target = 1.0 / static_cast<double>(m);
  std::vector<double> r(k, 1.0);
  std::vector<double> c(m, 1.0);
  std::vector<double> col_acc(m);

  auto check_finite = [&](double v) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw SinkhornError("sinkhorn scaling became non-finite; lower reg (currently " + std::to_string(cfg.reg) + ")");
    }
  };

  int iterations = 0;
  double row_violation = 0.0;
  while (iterations < cfg.max_iters) {
    for (std::size_t i = 0; i < k; ++i) {
      const double s = kern.dot(kernel.row(i).data(), c.data(), m);
      check_finite(s);
      r[i] = row_target / s;
      check_finite(r[i]);
    }
    std::fill(col_acc.begin(), col_acc.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) kern.axpy(r[i], kernel.row(i).data(), col_acc.data(), m);
    for (std::size_t j = 0; j < m; ++j) {
      check_finite(col_acc[j]);
      c[j] = col_target / col_acc[j];
      check_finite(c[j]);
    }
    ++iterations;

    row_violation = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      row_violation = std::max(row_violation, std::abs(r[i] * kern.dot(kernel.row(i).data(), c.data(), m) - row_target));
    }
    if (row_violation <= cfg.marginal_tol) break;
  }

  Matrix q(k, m);
  for (std::size_t i = 0; i < k; ++i) kern.scaled_product(r[i], kernel.row(i).data(), c.data(), q.row(i).data(), m);
  const double residual = max_marginal_violation(q);
  return SinkhornResult{AssignmentMatrix(round_to_polytope(std::move(q))), iterations, residual};
}

PseudoLabelSet harden(const AssignmentMatrix& q, const LabelSpace& ls, std::span<const std::size_t> subset) {
  if (subset.size() != q.m()) throw DimensionError("subset size differs from assignment columns");
  if (q.k() > ls.k_extra()) throw DimensionError("assignment has more rows than extra classes");
  PseudoLabelSet out(ls.total());
  for (std::size_t j = 0; j < q.m(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.k(); ++i) {
      if (q(i, j) > q(best, j)) best = i;
    }
    out.add(subset[j], ls.k_id() + best);
  }
  return out;
}

Matrix harden_to_vertex(const AssignmentMatrix& q) {
  const std::size_t k = q.k();
  const std::size_t m = q.m();
  // Capacities in units of 1/(K*M): rows hold M units, columns hold K.
  std::vector<std::size_t> row_left(k, m);
  std::vector<std::size_t> col_left(m, k);
  std::vector<std::size_t> order(k * m);
  std::iota(order.begin(), order.end(), 0);
  const auto& qm = q.matrix().data();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return qm[a] > qm[b]; });

  Matrix vertex(k, m);
  const double unit = 1.0 / static_cast<double>(k * m);
  for (std::size_t cell : order) {
    const std::size_t i = cell / m;
    const std::size_t j = cell % m;
    const std::size_t amount = std::min(row_left[i], col_left[j]);
    if (amount == 0) continue;
    vertex(i, j) = static_cast<double>(amount) * unit;
    row_left[i] -= amount;
    col_left[j] -= amount;
  }
  return vertex;
}

double transport_cost(const Matrix& q, const Matrix& p) {
  if (q.rows() != p.rows() || q.cols() != p.cols()) throw DimensionError("transport_cost: shape mismatch");
  double cost = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t j = 0; j < q.cols(); ++j) cost -= q(i, j) * std::log(std::max(p(i, j), kExtraProbabilityFloor));
  }
  return cost;
}

SecResult sec(const PredictionMatrix& p, const LabelSpace& ls, const ConfidenceVector& conf, double gamma,
              const SinkhornConfig& cfg) {
  if (ls.k_extra() == 0) throw std::invalid_argument("SEC needs at least one extra class");
  if (conf.size() != p.rows()) throw DimensionError("confidence vector length differs from prediction rows");
  SecResult out;
  out.labels = PseudoLabelSet(ls.total());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    if (conf[r] < gamma) out.subset.push_back(r);
  }
  if (out.subset.empty()) return out;

  auto extra = normalize_extra(p, ls, out.subset);
  auto solved = sinkhorn_assign(extra.p, cfg);
  out.labels = harden(solved.q, ls, out.subset);
  out.zero_mass = std::move(extra.zero_mass);
  out.iterations = solved.iterations;
  out.residual = solved.residual;
  return out;
}

}  // namespace upsilon
