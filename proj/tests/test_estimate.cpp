#include <gtest/gtest.h>

#include <random>

#include "osgrf/estimate.hpp"
#include "test_util.hpp"

using namespace osgrf;

namespace {

FieldSpec unit_square(std::size_t n, std::vector<double> e0, double H, std::uint64_t seed) {
  FieldSpec s;
  s.E0 = AnisotropyMatrix(diag_matrix(e0));
  s.H0 = H;
  s.rho = diagonal_pseudonorm(e0);
  s.grid = {{n, n}, {1.0 / n, 1.0 / n}};
  s.spectral = {{n, n}, 8};
  s.seed = seed;
  return s;
}

template <class F>
double simpson(F f, double a, double b, int n = 20000) {
  double h = (b - a) / n, s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

}  // namespace

TEST(CandidateGrid, Examples) {
  auto one = candidate_grid(2, 1.0, 1.0, 0.1);
  ASSERT_EQ(one.members.size(), 1u);
  EXPECT_EQ(one.members[0].anisotropy.lambda, (std::vector<double>{1.0, 1.0}));
  auto three = candidate_grid(2, 0.8, 1.2, 0.2);
  ASSERT_EQ(three.members.size(), 3u);
  EXPECT_NEAR(three.members[0].anisotropy.lambda[0], 0.8, 1e-12);
  EXPECT_NEAR(three.members[1].anisotropy.lambda[0], 1.0, 1e-12);
  EXPECT_NEAR(three.members[2].anisotropy.lambda[0], 1.2, 1e-12);
  auto nine = candidate_grid(2, 0.6, 1.4, 0.1);
  ASSERT_EQ(nine.members.size(), 9u);
  for (const auto& m : nine.members) EXPECT_NEAR(m.anisotropy.lambda[0] + m.anisotropy.lambda[1], 2.0, 1e-12);
  EXPECT_EQ(nine.members[6].param, 1.2);
}

TEST(CandidateGrid, Errors) {
  EXPECT_THROW(candidate_grid(2, 0.5, 2.0, 0.5), Error);
  EXPECT_THROW(candidate_grid(3, 0.8, 1.2, 0.1), Error);
  EXPECT_THROW(candidate_grid(2, 0.0, 1.2, 0.1), Error);
  EXPECT_THROW(candidate_grid(2, 0.8, 1.2, 0.0), Error);
}

TEST(CandidateFamily, NonDiagonalFlagged) {
  Matrix a = diag_matrix({1.2, 0.8});
  Matrix b(2, 2);
  b << 1.5, 0.3, 0.0, 1.5;
  auto fam = family_from_matrices({a, b});
  EXPECT_FALSE(fam.members[0].outside_hypothesis);
  EXPECT_TRUE(fam.members[1].outside_hypothesis);
  EXPECT_EQ(fam.members[1].anisotropy.lambda, (std::vector<double>{1.0, 1.0}));
  EXPECT_THROW(family_from_matrices({a, a}), Error);
}

TEST(PredictedAlpha, Formula) {
  EXPECT_NEAR(predicted_alpha({1.2, 0.8}, 0.4, DiagonalAnisotropy({0.8, 1.2})), 0.4 * 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(predicted_alpha({1.2, 0.8}, 0.4, DiagonalAnisotropy({0.8, 1.2})), 0.2667, 1e-4);
  EXPECT_NEAR(predicted_alpha({1.2, 0.8}, 0.4, DiagonalAnisotropy({1.2, 0.8})), 0.4, 1e-15);
  EXPECT_NEAR(predicted_alpha({1.2, 0.8}, 0.4, DiagonalAnisotropy({1, 1})), 0.4 / 1.2, 1e-15);
}

TEST(TentFit, RecoversExactTent) {
  std::vector<std::pair<double, double>> curve;
  for (double l = 0.6; l < 1.41; l += 0.1) curve.push_back({l, 0.4 * std::min(l / 1.2, (2 - l) / 0.8)});
  auto t = fit_tent(curve);
  EXPECT_NEAR(t.lambda0, 1.2, 1e-3);
  EXPECT_NEAR(t.H, 0.4, 2e-3);
  EXPECT_GT(t.r2, 0.9999);
}

TEST(TieBreak, NearestIsotropyThenSmaller) {
  auto fam = candidate_grid(2, 0.8, 1.2, 0.1);
  EXPECT_EQ(detail::argmax_with_ties({0.3, 0.5, 0.1, 0.5, 0.2}, fam.members), 1u);
  EXPECT_EQ(detail::argmax_with_ties({0.3, 0.2, 0.3, 0.2, 0.3}, fam.members), 2u);
  EXPECT_EQ(detail::argmax_with_ties({0.5, 0.2, 0.1, 0.2, 0.5}, fam.members), 0u);
}

TEST(Search, AnisotropicField) {
  SpectralSynthesizer syn(unit_square(512, {1.2, 0.8}, 0.4, 3));
  auto fields = syn.realize_batch(0, 4);
  auto fam = candidate_grid(2, 0.6, 1.4, 0.1);
  auto res = anisotropy_search(fields, fam);
  ASSERT_EQ(res.curve.size(), 9u);
  EXPECT_NEAR(res.curve[res.argmax].first, 1.2, 0.1 + 1e-9);
  EXPECT_NEAR(res.H_hat, 0.4, 0.1);
  EXPECT_NEAR(res.per_candidate[2].alpha_mean, 0.2667, 0.1);
  double mx = 0;
  for (const auto& c : res.per_candidate) mx = std::max(mx, c.alpha_mean);
  EXPECT_EQ(res.H_hat, mx);
  int votes = 0;
  for (const auto& c : res.per_candidate) {
    votes += c.votes;
    EXPECT_EQ(c.estimates.size(), 4u);
    EXPECT_GT(c.alpha_stderr, 0.0);
  }
  EXPECT_EQ(votes, 4);
}

TEST(Search, IsotropicField) {
  SpectralSynthesizer syn(unit_square(512, {1, 1}, 0.5, 4));
  auto res = anisotropy_search(syn.realize_batch(0, 4), candidate_grid(2, 0.6, 1.4, 0.1));
  EXPECT_NEAR(res.curve[res.argmax].first, 1.0, 0.1 + 1e-9);
  EXPECT_NEAR(res.H_hat, 0.5, 0.1);
}

TEST(Search, ArgmaxInvariantUnderAmplitude) {
  SpectralSynthesizer syn(unit_square(256, {1.2, 0.8}, 0.4, 5));
  auto fields = syn.realize_batch(0, 2);
  auto scaled = fields;
  for (auto& f : scaled)
    for (double& v : f.values.data) v *= 3.25;
  auto fam = candidate_grid(2, 0.8, 1.2, 0.1);
  auto a = anisotropy_search(fields, fam), b = anisotropy_search(scaled, fam);
  EXPECT_EQ(a.argmax, b.argmax);
  for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_NEAR(a.curve[i].second, b.curve[i].second, 1e-12);
}

TEST(Search, ThreadCountDoesNotChangeResult) {
  SpectralSynthesizer syn(unit_square(256, {1.2, 0.8}, 0.4, 6));
  auto fields = syn.realize_batch(0, 3);
  auto fam = candidate_grid(2, 0.8, 1.2, 0.2);
  SearchOptions one, many;
  many.threads = 3;
  auto a = anisotropy_search(fields, fam, one), b = anisotropy_search(fields, fam, many);
  for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].second, b.curve[i].second);
}

TEST(Search, Errors) {
  EXPECT_THROW(anisotropy_search({}, candidate_grid(2, 1, 1, 0.1)), Error);
  SpectralSynthesizer syn(unit_square(64, {1, 1}, 0.5, 1));
  EXPECT_THROW(anisotropy_search(syn.realize_batch(0, 1), CandidateFamily{}), Error);
}

TEST(NormalizedStats, GaussianMoments) {
  // Independent standard normal coefficients in the transform layout.
  DiagonalAnisotropy D({1.2, 0.8});
  std::vector<int> levels{9, 9};
  auto set = empty_coefficient_set(D, levels, max_unclamped_scale(D, levels), 4);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n(0.0, 2.5);
  for (auto& b : set.branches)
    for (double& v : b.values.data) v = n(gen) * std::exp2(-0.3 * b.j);
  const double abs_moment = 2 * simpson([](double x) { return x * std::exp(-x * x / 2) / std::sqrt(2 * M_PI); }, 0, 12);
  EXPECT_NEAR(abs_moment, std::sqrt(2 / M_PI), 1e-10);
  EXPECT_NEAR(abs_moment, 0.79788, 1e-5);
  auto s2 = normalized_coefficient_stats(set, 2);
  auto s1 = normalized_coefficient_stats(set, 1);
  ASSERT_GE(s2.size(), 2u);
  for (std::size_t i = 0; i < s2.size(); ++i) {
    EXPECT_NEAR(s2[i].mean_p, 1.0, 1e-12);
    if (s1[i].n_j >= 10000) {
      EXPECT_NEAR(s1[i].mean_p, abs_moment, 0.05 * abs_moment);
    }
    if (s1[i].n_j >= 1000) {
      EXPECT_GE(s1[i].max_norm, 0.5);
      EXPECT_LE(s1[i].max_norm, 3.0);
    }
    EXPECT_GT(s1[i].window_cells, 0.0L);
  }
}

TEST(NormalizedStats, Errors) {
  DiagonalAnisotropy D({1, 1});
  auto set = empty_coefficient_set(D, {8, 8}, 6, 4);
  EXPECT_THROW(normalized_coefficient_stats(set, 2), Error);
  auto small = empty_coefficient_set(D, {8, 8}, 4, 4);
  for (auto& b : small.branches)
    for (double& v : b.values.data) v = 1.0;
  try {
    normalized_coefficient_stats(small, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
  }
}

TEST(NormalizedStats, EdgeWrappingCoefficientsExcluded) {
  DiagonalAnisotropy D({1, 1});
  auto set = empty_coefficient_set(D, {8, 8}, 6, 4);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& b : set.branches)
    for (double& v : b.values.data) v = n(gen);
  auto before = normalized_coefficient_stats(set, 2);
  std::size_t total = 0, kept = 0;
  for (auto& b : set.branches) {
    if (b.j != before[0].j) continue;
    total += b.values.size();
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      if (set.wraps(b, b.values.unflat(i)))
        b.values[i] = 1e6;
      else
        ++kept;
    }
  }
  ASSERT_LT(kept, total);
  auto after = normalized_coefficient_stats(set, 2);
  EXPECT_EQ(after[0].n_j, kept);
  EXPECT_DOUBLE_EQ(after[0].max_norm, before[0].max_norm);
  auto all = normalized_coefficient_stats(set, 2, 100, false);
  EXPECT_EQ(all[0].n_j, total);
}

TEST(NormalizedStats, SynthesizedField) {
  SpectralSynthesizer syn(unit_square(512, {1.2, 0.8}, 0.4, 9));
  auto f = syn.realize(0);
  DiagonalAnisotropy D({1.2, 0.8});
  auto set = anisotropic_wavelet_transform(f, D, max_unclamped_scale(D, {9, 9}), 4);
  for (const auto& s : normalized_coefficient_stats(set, 1)) {
    if (s.n_j >= 10000) {
      EXPECT_NEAR(s.mean_p, std::sqrt(2 / M_PI), 0.05 * std::sqrt(2 / M_PI)) << s.j;
    }
    if (s.n_j >= 1000) {
      EXPECT_GE(s.max_norm, 0.5);
      EXPECT_LE(s.max_norm, 3.0);
    }
  }
}
