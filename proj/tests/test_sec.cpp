#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "upsilon/sec_clustering.hpp"

using namespace upsilon;

namespace {

// Column-stochastic K x M matrix.
Matrix random_columns(std::size_t k, std::size_t m, std::mt19937_64& rng) {
  const Matrix t = oracle::random_stochastic(m, k, rng);
  Matrix out(k, m);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = t(j, i);
  return out;
}

}  // namespace

TEST(NormalizeExtra, DirectNormalization) {
  const LabelSpace ls(2, 2);
  const PredictionMatrix p(Matrix::from_rows({{0.6, 0.0, 0.1, 0.3}, {0.4, 0.0, 0.3, 0.3}}));
  const std::vector<std::size_t> subset{0, 1};
  const auto e = normalize_extra(p, ls, subset);
  EXPECT_NEAR(e.p(0, 0), 0.25, 1e-7);
  EXPECT_NEAR(e.p(1, 0), 0.75, 1e-7);
  EXPECT_NEAR(e.p(0, 1), 0.5, 1e-12);
  EXPECT_TRUE(e.zero_mass.empty());
}

TEST(NormalizeExtra, ZeroMassColumnsAreUniformAndReported) {
  const LabelSpace ls(2, 2);
  const PredictionMatrix p(Matrix::from_rows({{1.0, 0.0, 0.0, 0.0}}));
  const std::vector<std::size_t> subset{0};
  const auto e = normalize_extra(p, ls, subset);
  EXPECT_NEAR(e.p(0, 0), 0.5, 1e-12);
  EXPECT_EQ(e.zero_mass, subset);
}

TEST(NormalizeExtra, RandomColumnsSumToOne) {
  std::mt19937_64 rng(5);
  const LabelSpace ls(3, 4);
  const PredictionMatrix p(oracle::random_stochastic(40, 7, rng));
  std::vector<std::size_t> subset(40);
  std::iota(subset.begin(), subset.end(), 0);
  const auto e = normalize_extra(p, ls, subset);
  for (std::size_t j = 0; j < 40; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) s += e.p(i, j);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Sinkhorn, SingleRowIsUniform) {
  std::mt19937_64 rng(6);
  const auto r = sinkhorn_assign(random_columns(1, 9, rng), {});
  for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(r.q(0, j), 1.0 / 9.0, 1e-15);
}

TEST(Sinkhorn, UniformInputGivesUniformPlan) {
  const auto r = sinkhorn_assign(Matrix(3, 5, 1.0 / 3.0), {});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(r.q(i, j), 1.0 / 15.0, 1e-15);
}

TEST(Sinkhorn, TwoByTwoRecoversLpOptimum) {
  const Matrix p = Matrix::from_rows({{0.9, 0.1}, {0.1, 0.9}});
  const auto r = sinkhorn_assign(p, {});
  EXPECT_NEAR(r.q(0, 0), 0.5, 1e-6);
  EXPECT_NEAR(r.q(1, 1), 0.5, 1e-6);
  const LabelSpace ls(2, 2);
  const std::vector<std::size_t> subset{0, 1};
  const auto labels = harden(r.q, ls, subset);
  EXPECT_EQ(labels.label_of(0), 2u);
  EXPECT_EQ(labels.label_of(1), 3u);
}

TEST(Sinkhorn, FeasibleOnRandomInstances) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> kd(1, 8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = kd(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(k, 64)(rng);
    const auto r = sinkhorn_assign(random_columns(k, m, rng), {});
    EXPECT_LT(max_marginal_violation(r.q.matrix()), kMarginalTolerance);
    EXPECT_LE(r.iterations, 32);
  }
}

TEST(Sinkhorn, ResidualNonincreasingInIterations) {
  std::mt19937_64 rng(9);
  const Matrix p = random_columns(4, 200, rng);
  double prev = INFINITY;
  for (int it : {1, 2, 4, 8, 16, 32}) {
    SinkhornConfig cfg;
    cfg.max_iters = it;
    cfg.marginal_tol = 1e-300;
    const auto r = sinkhorn_assign(p, cfg);
    EXPECT_LE(r.residual, prev + 1e-15) << it;
    prev = r.residual;
  }
}

TEST(Sinkhorn, RejectsBadConfig) {
  SinkhornConfig cfg;
  cfg.reg = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_THROW(sinkhorn_assign(Matrix(0, 3), {}), DimensionError);
}

TEST(RoundToPolytope, ExactMarginals) {
  std::mt19937_64 rng(10);
  Matrix q = random_columns(3, 7, rng);
  const Matrix r = round_to_polytope(q);
  EXPECT_LT(max_marginal_violation(r), 1e-15);
  for (double v : r.data()) EXPECT_GE(v, 0.0);
}

TEST(Harden, ColumnArgmaxAndTieBreak) {
  const LabelSpace ls(3, 2);
  const std::vector<std::size_t> subset{10, 11};
  const auto a = harden(AssignmentMatrix(Matrix::from_rows({{0.5, 0}, {0, 0.5}})), ls, subset);
  EXPECT_EQ(a.label_of(10), 3u);
  EXPECT_EQ(a.label_of(11), 4u);
  const auto u = harden(AssignmentMatrix(Matrix(2, 2, 0.25)), ls, subset);
  EXPECT_EQ(u.label_of(10), 3u);
  EXPECT_EQ(u.label_of(11), 3u);
}

TEST(Harden, MatchesColumnScan) {
  std::mt19937_64 rng(11);
  const LabelSpace ls(2, 4);
  const auto q = AssignmentMatrix(sinkhorn_assign(random_columns(4, 30, rng), {}).q.matrix());
  std::vector<std::size_t> subset(30);
  std::iota(subset.begin(), subset.end(), 100);
  const auto labels = harden(q, ls, subset);
  for (std::size_t j = 0; j < 30; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i) if (q(i, j) > q(best, j)) best = i;
    EXPECT_EQ(labels.label_of(100 + j), 2 + best);
  }
}

TEST(HardenToVertex, NearLpOptimumOnSmallInstances) {
  std::mt19937_64 rng(12);
  // Run to convergence; 32 iterations at reg 25 leave peaked inputs far from the plan.
  SinkhornConfig converged;
  converged.max_iters = 5000;
  converged.marginal_tol = 1e-10;
  for (std::size_t k = 1; k <= 3; ++k) {
    for (std::size_t m = k; m <= 3; ++m) {
      for (int t = 0; t < 20; ++t) {
        const Matrix p = random_columns(k, m, rng);
        const Matrix v = harden_to_vertex(sinkhorn_assign(p, converged).q);
        EXPECT_LT(max_marginal_violation(v), 1e-12);
        Matrix cost(k, m);
        for (std::size_t i = 0; i < k * m; ++i) cost.data()[i] = -std::log(std::max(p.data()[i], 1e-8));
        const double opt = oracle::transport_lp_optimum(cost);
        EXPECT_LE(transport_cost(v, p), opt * 1.05 + 1e-12) << k << "x" << m << " t=" << t;
      }
    }
  }
}

TEST(Sec, MembershipFilter) {
  std::mt19937_64 rng(13);
  const LabelSpace ls(3, 2);
  const PredictionMatrix p(oracle::random_stochastic(60, 5, rng));
  const auto conf = id_confidence(p, ls);
  const auto out = sec(p, ls, conf, 0.3, {});
  std::size_t below = 0;
  for (std::size_t i = 0; i < 60; ++i) {
    below += conf[i] < 0.3;
    EXPECT_EQ(out.labels.contains(i), conf[i] < 0.3) << i;
    if (auto c = out.labels.label_of(i)) EXPECT_TRUE(ls.is_extra(*c));
  }
  EXPECT_EQ(out.subset.size(), below);
}

TEST(Sec, GammaExtremes) {
  std::mt19937_64 rng(14);
  const LabelSpace ls(2, 1);
  const PredictionMatrix p(oracle::random_stochastic(10, 3, rng));
  const auto conf = id_confidence(p, ls);
  EXPECT_TRUE(sec(p, ls, conf, 0.0, {}).labels.empty());
  const auto all = sec(p, ls, conf, 1.0 + 1e-9, {});
  EXPECT_EQ(all.labels.size(), 10u);
  for (const auto& e : all.labels.entries()) EXPECT_EQ(e.cls, 2u);
}
