#pragma once

// Semantic Exploration Clustering: balanced assignment of low-confidence
// samples onto the extra classes by entropic optimal transport
// (Sinkhorn-Knopp), followed by per-sample argmax hardening.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "upsilon/confidence.hpp"
#include "upsilon/label_space.hpp"
#include "upsilon/matrix.hpp"

namespace upsilon {

inline constexpr double kExtraProbabilityFloor = 1e-8;
inline constexpr double kMarginalTolerance = 1e-6;

class SinkhornError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SinkhornConfig {
  double reg = 25.0;          // kernel exponent: K = P^reg
  int max_iters = 32;
  double marginal_tol = 1e-6; // early stop on max marginal violation

  void validate() const;
};

// Nonnegative K x M matrix on the uniform transportation polytope U(K, M):
// rows sum to 1/K and columns to 1/M within kMarginalTolerance.
class AssignmentMatrix {
 public:
  explicit AssignmentMatrix(Matrix q);

  std::size_t k() const { return q_.rows(); }
  std::size_t m() const { return q_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return q_(i, j); }
  const Matrix& matrix() const { return q_; }

 private:
  Matrix q_;
};

// Largest absolute deviation of row sums from 1/K and column sums from 1/M.
double max_marginal_violation(const Matrix& q);

struct ExtraPosteriors {
  Matrix p;                                // K x M, columns sum to 1
  std::vector<std::size_t> zero_mass;      // subset samples with no extra-class mass
};

// Column j is the extra-class posterior of sample subset[j], renormalized to
// sum to 1 and floored at 1e-8 (then renormalized again).
ExtraPosteriors normalize_extra(const PredictionMatrix& p, const LabelSpace& ls,
                                std::span<const std::size_t> subset);

struct SinkhornResult {
  AssignmentMatrix q;
  int iterations = 0;
  // Max marginal violation of the scaled kernel before the final rounding
  // onto U(K, M); this is the convergence measure of the iterations.
  double residual = 0.0;
};

// Alternating row/column scaling of P^reg towards uniform marginals, stopped
// at marginal_tol or max_iters, then rounded exactly onto U(K, M).
SinkhornResult sinkhorn_assign(const Matrix& p, const SinkhornConfig& cfg);

// Rounds a nonnegative matrix onto U(K, M): shrink rows over 1/K, shrink
// columns over 1/M, then add the rank-one correction for the remaining mass.
Matrix round_to_polytope(Matrix q);

// Extra-class label k_id + argmax_i Q[i][j] for every subset sample (lowest
// index wins ties).
PseudoLabelSet harden(const AssignmentMatrix& q, const LabelSpace& ls, std::span<const std::size_t> subset);

// Greedy largest-entry-first rounding of Q to a vertex (basic feasible
// solution) of U(K, M).
Matrix harden_to_vertex(const AssignmentMatrix& q);

// <Q, -log P> with P floored at 1e-8.
double transport_cost(const Matrix& q, const Matrix& p);

struct SecResult {
  PseudoLabelSet labels;
  std::vector<std::size_t> subset;  // samples with conf < gamma
  std::vector<std::size_t> zero_mass;
  int iterations = 0;
  double residual = 0.0;
};

// Samples with conf < gamma are clustered onto the extra classes.
SecResult sec(const PredictionMatrix& p, const LabelSpace& ls, const ConfidenceVector& conf, double gamma,
              const SinkhornConfig& cfg);

}  // namespace upsilon
