#include <gtest/gtest.h>

#include <random>

#include "osgrf/pseudonorm.hpp"
#include "test_util.hpp"

using namespace osgrf;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

// Composite Simpson rule, used as an independent 1-D oracle.
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
  double h = (b - a) / n, s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

double max_homogeneity_error(const PseudoNorm& rho, int samples, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> la(std::log(0.1), std::log(10.0));
  double worst = 0;
  for (int i = 0; i < samples; ++i) {
    Vector x = detail::sample_point(gen, rho.dim(), 1.0, 1.0);
    double a = std::exp(la(gen));
    Vector y = rho.homogeneity().power(a) * x;
    worst = std::max(worst, std::abs(rho(y) - a * rho(x)) / (a * rho(x)));
  }
  return worst;
}

}  // namespace

TEST(DiagonalPseudoNorm, Examples) {
  EXPECT_DOUBLE_EQ(diagonal_pseudonorm({1, 1})(vec({3, 4})), 7.0);
  EXPECT_NEAR(diagonal_pseudonorm({1.5, 0.5})(vec({8, 2})), 8.0, 1e-13);
  auto rho = diagonal_pseudonorm({1.2, 0.8});
  EXPECT_NEAR(rho(vec({std::pow(16.0, 1.2), std::pow(16.0, 0.8)})), 32.0, 1e-12);
  EXPECT_NEAR(rho(vec({1, 1})), 2.0, 1e-15);
  EXPECT_EQ(rho(vec({0, 0})), 0.0);
}

TEST(DiagonalPseudoNorm, RejectsNonPositiveExponent) {
  EXPECT_THROW(diagonal_pseudonorm({1.0, 0.0}), Error);
  EXPECT_THROW(diagonal_pseudonorm({-1.0, 3.0}), Error);
}

TEST(DiagonalPseudoNorm, HomogeneityIsExact) {
  EXPECT_LE(max_homogeneity_error(diagonal_pseudonorm({1.2, 0.8}), 5000, 1), 1e-12);
  EXPECT_LE(max_homogeneity_error(diagonal_pseudonorm({1.5, 0.5}), 5000, 2), 1e-12);
  EXPECT_LE(max_homogeneity_error(diagonal_pseudonorm({0.7, 1.1, 1.2}), 5000, 3), 1e-12);
}

TEST(IntegralPseudoNorm, IsotropicIndicatorMatchesClosedForm) {
  BumpProfile ind{BumpProfile::Shape::indicator, 1.0, 2.0};
  auto rho = integral_pseudonorm(AnisotropyMatrix(Matrix::Identity(2, 2)), ind);
  double oracle = simpson([](double s) { return 1.0 / (s * s); }, 1.0, 2.0);
  EXPECT_NEAR(oracle, 0.5, 1e-12);
  EXPECT_NEAR(rho(vec({0.6, 0.8})), oracle, 1e-12);
  EXPECT_NEAR(rho(vec({3, 4})), 2.5, 1e-11);
}

TEST(IntegralPseudoNorm, SmoothProfileMatchesDirectQuadrature) {
  // For E = Id the integral reduces to |x| * int phi(s) / s^2 ds.
  BumpProfile bump;
  auto rho = integral_pseudonorm(AnisotropyMatrix(Matrix::Identity(2, 2)), bump);
  double c = simpson([&](double s) { return bump(s) / (s * s); }, 1.0, 2.0, 200000);
  EXPECT_NEAR(rho(vec({0.6, 0.8})), c, 1e-9);
  EXPECT_NEAR(rho(vec({-3, 4})), 5 * c, 1e-8);
}

TEST(IntegralPseudoNorm, Homogeneity) {
  std::vector<Matrix> Es;
  Es.push_back(diag_matrix({1.2, 0.8}));
  Es.push_back(diag_matrix({1.5, 0.5}));
  Matrix R(2, 2);
  R << 1, -1, 1, 1;
  Es.push_back(R);
  Matrix J(2, 2);
  J << 1, 1, 0, 1;
  Es.push_back(J);
  Matrix K(2, 2);
  K << 1, 3, 0, 1;  // symmetric part indefinite: orbit radius not monotone
  Es.push_back(K);
  for (const auto& E : Es) {
    auto rho = integral_pseudonorm(AnisotropyMatrix(E));
    EXPECT_LE(max_homogeneity_error(rho, 300, 5), 1e-8);
    Vector x = vec({0.3, -0.7});
    EXPECT_NEAR(rho(Vector(matrix_power(E, 4.0) * x)), 4 * rho(x), 1e-8 * rho(x));
  }
}

TEST(IntegralPseudoNorm, RejectsProfileTouchingOrigin) {
  BumpProfile bad{BumpProfile::Shape::smooth, 0.0, 2.0};
  EXPECT_THROW(integral_pseudonorm(AnisotropyMatrix(Matrix::Identity(2, 2)), bad), Error);
}

TEST(IntegralPseudoNorm, PositiveAndFiniteOffOrigin) {
  auto rho = integral_pseudonorm(AnisotropyMatrix(diag_matrix({1.2, 0.8})));
  std::mt19937_64 gen(9);
  for (int i = 0; i < 500; ++i) {
    Vector x = detail::sample_point(gen, 2, 1e-6, 1e6);
    double v = rho(x);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
  }
  EXPECT_EQ(rho(vec({0, 0})), 0.0);
}

TEST(PolarDecompose, IsotropicEuclidean) {
  auto p = polar_decompose(euclidean_pseudonorm(2), vec({3, 4}));
  EXPECT_NEAR(p.r, 5.0, 1e-12);
  EXPECT_NEAR(p.theta(0), 0.6, 1e-12);
  EXPECT_NEAR(p.theta(1), 0.8, 1e-12);
}

TEST(PolarDecompose, DiagonalExample) {
  auto rho = diagonal_pseudonorm({1.5, 0.5});
  auto p = polar_decompose(rho, vec({8, 2}));
  EXPECT_NEAR(p.r, 8.0, 1e-10);
  EXPECT_NEAR(p.theta(0), std::pow(2.0, -1.5), 1e-10);
  EXPECT_NEAR(p.theta(1), 2 * std::pow(2.0, -1.5), 1e-10);
  EXPECT_NEAR(p.theta(0), 0.35355, 1e-5);
  EXPECT_NEAR(p.theta(1), 0.70711, 1e-5);
  EXPECT_NEAR(rho(p.theta), 1.0, 1e-10);
}

TEST(PolarDecompose, RejectsOrigin) {
  EXPECT_THROW(polar_decompose(euclidean_pseudonorm(2), vec({0, 0})), Error);
}

TEST(PolarDecompose, RoundTripBothKinds) {
  std::vector<PseudoNorm> norms{diagonal_pseudonorm({1.2, 0.8}),
                                integral_pseudonorm(AnisotropyMatrix(diag_matrix({1.2, 0.8})))};
  std::mt19937_64 gen(4);
  for (const auto& rho : norms) {
    double tmin = 1e300, tmax = 0;
    for (int i = 0; i < 300; ++i) {
      Vector x = detail::sample_point(gen, 2, 1e-3, 1e3);
      auto p = polar_decompose(rho, x);
      EXPECT_LE((polar_compose(rho, p) - x).norm() / x.norm(), 1e-8);
      EXPECT_NEAR(rho(p.theta), 1.0, 1e-8);
      tmin = std::min(tmin, p.theta.norm());
      tmax = std::max(tmax, p.theta.norm());
    }
    EXPECT_GT(tmin, 0.05);
    EXPECT_LT(tmax, 20.0);
  }
}

TEST(EquivalenceConstants, Identity) {
  auto rho = diagonal_pseudonorm({1.2, 0.8});
  auto r = equivalence_constants(rho, rho, 1000);
  EXPECT_DOUBLE_EQ(r.c_low, 1.0);
  EXPECT_DOUBLE_EQ(r.c_high, 1.0);
  EXPECT_EQ(r.log_exponent_fit, 0.0);
}

TEST(EquivalenceConstants, RescaledByThree) {
  auto r = equivalence_constants(diagonal_pseudonorm({1.2, 0.8}, 3.0), diagonal_pseudonorm({1.2, 0.8}), 1000);
  EXPECT_NEAR(r.c_low, 3.0, 1e-12);
  EXPECT_NEAR(r.c_high, 3.0, 1e-12);
  EXPECT_EQ(r.log_exponent_fit, 0.0);
}

TEST(EquivalenceConstants, DiagonalVersusIntegral) {
  for (auto lam : {std::vector<double>{1.2, 0.8}, std::vector<double>{1.5, 0.5}}) {
    auto r = equivalence_constants(integral_pseudonorm(AnisotropyMatrix(diag_matrix(lam))),
                                   diagonal_pseudonorm(lam), 10000);
    EXPECT_GT(r.c_low, 0.0);
    EXPECT_TRUE(std::isfinite(r.c_high));
    EXPECT_LT(r.c_high / r.c_low, 10.0);
  }
}

TEST(EquivalenceConstants, MismatchedDiagonalPartRejected) {
  EXPECT_THROW(equivalence_constants(diagonal_pseudonorm({1.2, 0.8}), diagonal_pseudonorm({1, 1}), 100), Error);
}

TEST(EquivalenceConstants, LogCorrectionWithinBound) {
  Matrix J(2, 2);
  J << 1, 1, 0, 1;
  Matrix R(2, 2);
  R << 1, -1, 1, 1;
  for (const Matrix& E : {J, R}) {
    auto r = equivalence_constants(integral_pseudonorm(AnisotropyMatrix(E)), euclidean_pseudonorm(2), 4000);
    EXPECT_GT(r.c_low, 0.0);
    EXPECT_LE(r.log_exponent_fit, 2.0 / 1.0 + 0.5);
  }
}

TEST(QuasiTriangle, FiniteAndStabilizing) {
  for (const auto& rho : {diagonal_pseudonorm({1.5, 0.5}), euclidean_pseudonorm(2),
                          integral_pseudonorm(AnisotropyMatrix(diag_matrix({1.2, 0.8})))}) {
    auto t = quasi_triangle_constant(rho, rho.kind() == PseudoNorm::Kind::integral ? 10000 : 100000);
    EXPECT_TRUE(std::isfinite(t.constant));
    ASSERT_GE(t.running_max.size(), 2u);
    double last = t.running_max.back().second, prev = t.running_max[t.running_max.size() - 2].second;
    EXPECT_LE(last / prev, 1.1);
  }
  EXPECT_LE(quasi_triangle_constant(euclidean_pseudonorm(2), 10000).constant, 1.0 + 1e-12);
}
