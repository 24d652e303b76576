#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "upsilon/kernels.hpp"

namespace k = upsilon::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Sizes straddle the 4-lane width and the unrolled 16-element blocks.
const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 31, 33, 64, 100, 1027};

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol * std::max(1.0, std::abs(a[i]))) << i;
}

class Avx2Equivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    simd = k::avx2();
    if (simd == nullptr) GTEST_SKIP() << "no AVX2+FMA on this host or build";
  }
  const k::KernelTable& ref = k::scalar();
  const k::KernelTable* simd = nullptr;
  std::mt19937_64 rng{7};
};

}  // namespace

TEST(Kernels, ScalarBasics) {
  const auto& t = k::scalar();
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  EXPECT_DOUBLE_EQ(t.dot(a.data(), b.data(), 3), 32.0);
  EXPECT_DOUBLE_EQ(t.sum(a.data(), 3), 6.0);
  t.axpy(2.0, a.data(), b.data(), 3);
  EXPECT_EQ(b, (std::vector<double>{6, 9, 12}));
  t.axpby(1.0, a.data(), 0.5, b.data(), 3);
  EXPECT_EQ(b, (std::vector<double>{4, 6.5, 9}));
  t.scale(-1.0, a.data(), 3);
  EXPECT_EQ(a, (std::vector<double>{-1, -2, -3}));
}

TEST(Kernels, AdamScalarMatchesHandComputation) {
  const auto& t = k::scalar();
  double p = 1.0, g = 0.5, m = 0.0, v = 0.0;
  const k::AdamCoefficients c{0.1, 0.9, 0.999, 1e-8, 1.0 - 0.9, 1.0 - 0.999};
  t.adam_update(&p, &g, &m, &v, 1, c);
  EXPECT_NEAR(m, 0.05, 1e-15);
  EXPECT_NEAR(v, 0.00025, 1e-15);
  // First Adam step moves by lr * sign(g) (up to epsilon).
  EXPECT_NEAR(p, 0.9, 1e-7);
}

TEST(Kernels, ActiveHonoursScalarOverride) {
  // Only checks the table is one of the two known ones.
  const auto& a = k::active();
  EXPECT_TRUE(a.name == k::scalar().name || (k::avx2() && a.name == k::avx2()->name));
}

TEST_F(Avx2Equivalence, DotAndSum) {
  for (std::size_t n : kSizes) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    EXPECT_NEAR(simd->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), 1e-12 * (1.0 + n)) << n;
    EXPECT_NEAR(simd->sum(a.data(), n), ref.sum(a.data(), n), 1e-12 * (1.0 + n)) << n;
  }
}

TEST_F(Avx2Equivalence, ElementwiseUpdates) {
  for (std::size_t n : kSizes) {
    const auto x = random_vec(n, rng), y0 = random_vec(n, rng), w = random_vec(n, rng);
    auto y1 = y0, y2 = y0;
    ref.axpy(0.37, x.data(), y1.data(), n);
    simd->axpy(0.37, x.data(), y2.data(), n);
    expect_close(y1, y2, 1e-14);

    y1 = y0, y2 = y0;
    ref.axpby(-1.3, x.data(), 0.25, y1.data(), n);
    simd->axpby(-1.3, x.data(), 0.25, y2.data(), n);
    expect_close(y1, y2, 1e-14);

    y1 = y0, y2 = y0;
    ref.scale(3.5, y1.data(), n);
    simd->scale(3.5, y2.data(), n);
    expect_close(y1, y2, 0.0);

    std::vector<double> o1(n), o2(n);
    ref.scaled_product(0.5, x.data(), w.data(), o1.data(), n);
    simd->scaled_product(0.5, x.data(), w.data(), o2.data(), n);
    expect_close(o1, o2, 1e-15);
  }
}

TEST_F(Avx2Equivalence, AdamUpdate) {
  const k::AdamCoefficients c{3e-3, 0.9, 0.999, 1e-8, 1.0 - std::pow(0.9, 5), 1.0 - std::pow(0.999, 5)};
  for (std::size_t n : kSizes) {
    auto p1 = random_vec(n, rng), m1 = random_vec(n, rng), v1 = random_vec(n, rng);
    for (auto& x : v1) x = std::abs(x);
    const auto g = random_vec(n, rng);
    auto p2 = p1, m2 = m1, v2 = v1;
    for (int step = 0; step < 3; ++step) {
      ref.adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, c);
      simd->adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, c);
    }
    expect_close(p1, p2, 1e-12);
    expect_close(m1, m2, 1e-14);
    expect_close(v1, v2, 1e-14);
  }
}
