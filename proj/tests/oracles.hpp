#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library under test.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "upsilon/matrix.hpp"

namespace upsilon::oracle {

// Row-stochastic n x c matrix; `sharpness` scales the Gaussian logits so
// larger values give more confident rows.
inline Matrix random_stochastic(std::size_t n, std::size_t c, std::mt19937_64& rng, double sharpness = 3.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix out(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += out(i, j) = std::exp(sharpness * g(rng));
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= s;
  }
  return out;
}

// Minimum of <X, cost> over U(K, M) by enumerating basic feasible solutions:
// every choice of K+M-1 cells whose equality system has a unique nonnegative
// solution is a vertex, and a linear objective attains its minimum at one.
inline double transport_lp_optimum(const Matrix& cost) {
  const std::size_t k = cost.rows(), m = cost.cols(), cells = k * m, basis = k + m - 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k + m), static_cast<Eigen::Index>(cells));
  Eigen::VectorXd b(static_cast<Eigen::Index>(k + m));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i * m + j)) = 1.0;
      a(static_cast<Eigen::Index>(k + j), static_cast<Eigen::Index>(i * m + j)) = 1.0;
    }
    b(static_cast<Eigen::Index>(i)) = 1.0 / static_cast<double>(k);
  }
  for (std::size_t j = 0; j < m; ++j) b(static_cast<Eigen::Index>(k + j)) = 1.0 / static_cast<double>(m);

  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(cells, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(basis), true);
  do {
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(basis));
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < cells; ++c) {
      if (pick[c]) {
        sub.col(static_cast<Eigen::Index>(idx.size())) = a.col(static_cast<Eigen::Index>(c));
        idx.push_back(c);
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.rank() != static_cast<Eigen::Index>(basis)) continue;
    const Eigen::VectorXd x = lu.solve(b);
    if ((sub * x - b).cwiseAbs().maxCoeff() > 1e-12 || x.minCoeff() < -1e-12) continue;
    double c = 0.0;
    for (std::size_t t = 0; t < idx.size(); ++t) c += x(static_cast<Eigen::Index>(t)) * cost.data()[idx[t]];
    best = std::min(best, c);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace upsilon::oracle
