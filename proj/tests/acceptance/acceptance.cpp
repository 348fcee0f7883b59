#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "../test_util.hpp"
#include "osgrf/estimate.hpp"

using namespace osgrf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f3(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3f", v);
  return b;
}

std::string sci(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2e", v);
  return b;
}

FieldSpec make_spec(std::vector<double> e0, double H, std::size_t n, double spacing, std::uint64_t seed) {
  FieldSpec s;
  s.E0 = AnisotropyMatrix(diag_matrix(e0));
  s.H0 = H;
  s.rho = e0 == std::vector<double>{1, 1} ? euclidean_pseudonorm(2) : diagonal_pseudonorm(e0);
  s.grid = {{n, n}, {spacing, spacing}};
  s.spectral = {{n, n}, 8};
  s.seed = seed;
  return s;
}

double mean(const std::vector<double>& v) { return test::mean(v); }
double sem(const std::vector<double>& v) { return test::stdev(v) / std::sqrt(static_cast<double>(v.size())); }

std::vector<double> alphas(const std::vector<FieldRealization>& fields, const DiagonalAnisotropy& D) {
  std::vector<double> out;
  for (const auto& f : fields) {
    const auto levels = detail::levels_of(f.values);
    auto set = anisotropic_wavelet_transform(f, D, max_unclamped_scale(D, levels), 4);
    out.push_back(critical_exponent_estimate(set, 2, 2).alpha_hat);
  }
  return out;
}

// ---------------------------------------------------------------- 1 - 5

Outcome homogeneity() {
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> la(std::log(0.1), std::log(10.0));
  auto worst = [&](const PseudoNorm& rho, int samples) {
    double w = 0;
    for (int i = 0; i < samples; ++i) {
      Vector xi = detail::sample_point(gen, rho.dim(), 1e-2, 1e2);
      double a = std::exp(la(gen));
      Vector y = rho.homogeneity().power(a) * xi;
      w = std::max(w, std::abs(rho(y) - a * rho(xi)) / (a * rho(xi)));
    }
    return w;
  };
  double diag = 0;
  for (auto l : {std::vector<double>{1.2, 0.8}, {1.5, 0.5}, {0.7, 1.1, 1.2}})
    diag = std::max(diag, worst(diagonal_pseudonorm(l), 10000));
  Matrix J(2, 2);
  J << 1, 1, 0, 1;
  double integral = 0;
  for (const Matrix& E : {diag_matrix({1.2, 0.8}), J})
    integral = std::max(integral, worst(integral_pseudonorm(AnisotropyMatrix(E)), 10000));
  return {diag <= 1e-12 && integral <= 1e-3,
          "diagonal max rel err " + sci(diag) + " (<= 1e-12), integral " + sci(integral) + " (<= 1e-3)"};
}

Outcome polar_roundtrip() {
  std::mt19937_64 gen(102);
  double rt = 0, unit = 0;
  for (const auto& rho : {diagonal_pseudonorm({1.2, 0.8}), integral_pseudonorm(AnisotropyMatrix(diag_matrix({1.2, 0.8})))})
    for (int i = 0; i < 10000; ++i) {
      Vector x = detail::sample_point(gen, 2, 1e-3, 1e3);
      auto p = polar_decompose(rho, x);
      rt = std::max(rt, (polar_compose(rho, p) - x).norm() / x.norm());
      unit = std::max(unit, std::abs(rho(p.theta) - 1.0));
    }
  return {rt <= 1e-8 && unit <= 1e-8, "roundtrip " + sci(rt) + ", |rho(theta) - 1| " + sci(unit) + " (<= 1e-8)"};
}

Outcome jordan() {
  std::mt19937_64 gen(103);
  int bad = 0;
  JordanResidual worst;
  for (int t = 0; t < 1000; ++t) {
    Matrix M = test::random_eplus(gen, 2 + t % 2);
    try {
      auto r = jordan_residual(M, jordan_additive_decompose(M));
      if (!jordan_ok(r, std::max(1.0, max_abs(M)))) ++bad;
      worst.recomposition = std::max(worst.recomposition, r.recomposition);
      worst.commutator = std::max(worst.commutator, r.commutator);
      worst.nilpotency = std::max(worst.nilpotency, r.nilpotency);
      worst.d_imag = std::max(worst.d_imag, r.d_imag);
      worst.s_real = std::max(worst.s_real, r.s_real);
    } catch (const Error&) {
      ++bad;
    }
  }
  return {bad == 0, std::to_string(bad) + " of 1000 outside tolerance; worst recomposition " +
                        sci(worst.recomposition) + ", commutator " + sci(worst.commutator) + ", nilpotency " +
                        sci(worst.nilpotency) + ", spectrum " + sci(std::max(worst.d_imag, worst.s_real))};
}

Outcome wavelet_orthonormality() {
  std::mt19937_64 gen(104);
  std::normal_distribution<double> n;
  NdArray x({64, 64});
  for (double& v : x.data) v = n(gen);
  double energy = 0, peak = 0;
  for (double v : x.data) energy += v * v, peak = std::max(peak, std::abs(v));
  double pars = 0, rec = 0;
  for (auto l : {std::vector<double>{1, 1}, {1.2, 0.8}, {1.5, 0.5}}) {
    DiagonalAnisotropy D(l);
    auto set = anisotropic_wavelet_transform(x, {1.0, 1.0}, D, complete_scale(D, {6, 6}), 4);
    double e = 0;
    for (const auto& b : set.branches)
      for (double v : b.values.data) e += v * v / std::ldexp(1.0, b.index.trace());
    pars = std::max(pars, std::abs(e - energy) / energy);
    auto y = reconstruct(set);
    for (std::size_t i = 0; i < x.size(); ++i) rec = std::max(rec, std::abs(y[i] - x[i]) / peak);
  }
  return {pars <= 1e-8 && rec <= 1e-8, "Parseval rel err " + sci(pars) + ", reconstruction " + sci(rec) + " (<= 1e-8)"};
}

// Exhaustive (G, gamma) search with rational exponents and integer floors.
std::set<std::pair<std::string, std::vector<int>>> brute_index_set(const std::vector<std::pair<int, int>>& lam, int j) {
  std::set<std::pair<std::string, std::vector<int>>> out;
  for (int mask = 0; mask < 4; ++mask) {
    std::string G;
    for (int r = 0; r < 2; ++r) G += ((mask >> r) & 1) ? 'M' : 'F';
    for (int g0 = 0; g0 <= 3 * j + 1; ++g0)
      for (int g1 = 0; g1 <= 3 * j + 1; ++g1) {
        std::vector<int> g{g0, g1};
        bool ok;
        if (j == 0) {
          ok = mask == 0 && g0 == 0 && g1 == 0;
        } else {
          ok = mask != 0;
          for (int r = 0; r < 2 && ok; ++r) {
            int lo = (j - 1) * lam[r].first / lam[r].second, hi = j * lam[r].first / lam[r].second;
            ok = G[r] == 'F' ? g[r] == lo : (lo <= g[r] && g[r] < hi);
          }
        }
        if (ok) out.insert({G, g});
      }
  }
  return out;
}

Outcome combinatorics() {
  int mismatches = 0;
  std::string slopes;
  bool slope_ok = true;
  for (auto lam : {std::vector<std::pair<int, int>>{{1, 1}, {1, 1}}, {{3, 2}, {1, 2}}, {{6, 5}, {4, 5}}}) {
    DiagonalAnisotropy D({static_cast<double>(lam[0].first) / lam[0].second,
                          static_cast<double>(lam[1].first) / lam[1].second});
    for (int j = 0; j <= 8; ++j) {
      std::set<std::pair<std::string, std::vector<int>>> got;
      for (const auto& p : build_index_set(D, j)) got.insert({p.G, p.gamma});
      if (got != brute_index_set(lam, j)) ++mismatches;
    }
    std::vector<double> js, ys;
    for (int j = 4; j <= 12; ++j) {
      long double n = build_index_set(D, j).size() * gamma_window_count(D, j);
      js.push_back(j);
      ys.push_back(std::log2(static_cast<double>(n)) - 2 * std::log2(static_cast<double>(j)));
    }
    double s = detail::slope(js, ys);
    slope_ok = slope_ok && std::abs(s - 2.0) <= 0.1;
    slopes += (slopes.empty() ? "" : ", ") + f3(s);
  }
  return {mismatches == 0 && slope_ok,
          std::to_string(mismatches) + " index-set mismatches for j <= 8; n_j slopes " + slopes + " (2 +- 0.1)"};
}

// ---------------------------------------------------------------- 6 - 8

Outcome isotropic_sanity() {
  auto spec = make_spec({1, 1}, 0.5, 256, 1.0, 42);
  auto fields = SpectralSynthesizer(spec).realize_batch(0, 200);
  std::vector<std::vector<double>> lags;
  for (double s : {4, 8, 16, 32}) {
    lags.push_back({s, 0.0});
    lags.push_back({0.0, s});
  }
  auto fit = power_law_fit(variogram_estimate(fields, lags));
  auto sc = scaling_law_check(fields, 4.0);
  return {std::abs(fit.slope - 1.0) <= 0.1 && std::abs(sc.H_hat - 0.5) <= 0.05,
          "variogram slope " + f3(fit.slope) + " (1.00 +- 0.10), H_hat " + f3(sc.H_hat) + " (0.50 +- 0.05)"};
}

// Grid-step units for the variogram laws, the unit square for wavelet analysis.
std::vector<FieldRealization> criterion7_fields(double spacing) {
  return SpectralSynthesizer(make_spec({1.2, 0.8}, 0.4, 256, spacing, 7)).realize_batch(0, 200);
}

Outcome operator_scaling() {
  auto fields = criterion7_fields(1.0);
  auto a2 = scaling_law_check(fields, 2.0), a4 = scaling_law_check(fields, 4.0);
  return {std::abs(a2.H_hat - 0.4) <= 0.05 && std::abs(a4.H_hat - 0.4) <= 0.05,
          "H_hat " + f3(a2.H_hat) + " at a = 2, " + f3(a4.H_hat) + " at a = 4 (0.40 +- 0.05)"};
}

Outcome variance_scaling() {
  auto fields = criterion7_fields(1.0 / 256);
  DiagonalAnisotropy D({1.2, 0.8});
  std::vector<double> sum(7, 0.0);
  std::vector<std::size_t> cnt(7, 0);
  for (const auto& f : fields) {
    auto set = anisotropic_wavelet_transform(f, D, 6, 4);
    for (const auto& b : set.branches)
      if (b.j >= 2)
        for (double v : b.values.data) sum[b.j] += v * v, ++cnt[b.j];
  }
  std::vector<double> js, ys;
  for (int j = 2; j <= 6; ++j) {
    js.push_back(j);
    ys.push_back(std::log2(sum[j] / cnt[j]));
  }
  double s = detail::slope(js, ys);
  return {std::abs(s + 0.8) <= 0.15, "slope of log2 E|c_j|^2 over j = 2..6: " + f3(s) + " (-0.80 +- 0.15)"};
}

// --------------------------------------------------------------- 9 - 12

constexpr std::size_t kLarge = 1024;

Outcome exponent_formulas(const std::vector<FieldRealization>& fields) {
  auto e0 = alphas(fields, DiagonalAnisotropy({1.2, 0.8}));
  auto id = alphas(fields, DiagonalAnisotropy({1, 1}));
  auto sw = alphas(fields, DiagonalAnisotropy({0.8, 1.2}));
  const double pe0 = 0.4, pid = predicted_alpha({1.2, 0.8}, 0.4, DiagonalAnisotropy({1, 1})),
               psw = predicted_alpha({1.2, 0.8}, 0.4, DiagonalAnisotropy({0.8, 1.2}));
  bool ok = std::abs(mean(e0) - pe0) <= 0.1 && std::abs(mean(id) - pid) <= 0.1 && std::abs(mean(sw) - psw) <= 0.1;
  return {ok, "alpha_hat(E0) " + f3(mean(e0)) + " (0.400), alpha_hat(Id) " + f3(mean(id)) + " (" + f3(pid) +
                  "), alpha_hat(diag(0.8,1.2)) " + f3(mean(sw)) + " (" + f3(psw) + "), tolerance 0.10, " +
                  std::to_string(fields.size()) + " fields"};
}

Outcome search(int seeds, int reps) {
  auto fam = candidate_grid(2, 0.6, 1.4, 0.1);
  std::map<double, int> hist;
  std::vector<double> H;
  std::vector<std::pair<double, double>> avg;
  for (const auto& c : fam.members) avg.push_back({c.param, 0.0});
  int near = 0;
  for (int s = 0; s < seeds; ++s) {
    auto fields = SpectralSynthesizer(make_spec({1.2, 0.8}, 0.4, kLarge, 1.0 / kLarge, 1000 + s)).realize_batch(0, reps);
    auto r = anisotropy_search(fields, fam);
    const double l = r.curve[r.argmax].first;
    ++hist[l];
    near += std::abs(l - 1.2) <= 0.1 + 1e-9;
    H.push_back(r.H_hat);
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i].second += r.curve[i].second / seeds;
  }
  double mode = 0;
  int best = -1;
  for (const auto& [l, c] : hist)
    if (c > best) best = c, mode = l;
  auto tent = fit_tent(avg);
  const bool ok = near >= 0.9 * seeds && std::abs(mode - 1.2) < 1e-9 && std::abs(mean(H) - 0.4) <= 0.1 && tent.r2 >= 0.8;
  std::ostringstream d;
  d << near << "/" << seeds << " runs in {1.1, 1.2, 1.3}, modal lambda " << mode << ", mean H_hat " << f3(mean(H))
    << " (0.40 +- 0.10), tent R^2 " << f3(tent.r2) << " (>= 0.8), tent peak " << f3(tent.lambda0);
  return {ok, d.str()};
}

Outcome normalized_stats(const std::vector<FieldRealization>& fields) {
  DiagonalAnisotropy D({1.2, 0.8});
  const double target1 = std::sqrt(2 / std::numbers::pi);
  double worst2 = 0, worst1 = 0, lo = infinity, hi = 0, hi_all = 0;
  int big = 0, mid = 0;
  for (const auto& f : fields) {
    auto set = anisotropic_wavelet_transform(f, D, max_unclamped_scale(D, detail::levels_of(f.values)), 4);
    auto s2 = normalized_coefficient_stats(set, 2), s1 = normalized_coefficient_stats(set, 1);
    for (const auto& s : normalized_coefficient_stats(set, 2, 100, false))
      if (s.n_j >= 1000) hi_all = std::max(hi_all, s.max_norm);
    for (std::size_t i = 0; i < s2.size(); ++i) {
      if (s2[i].n_j >= 10000) {
        ++big;
        worst2 = std::max(worst2, std::abs(s2[i].mean_p - 1.0));
        worst1 = std::max(worst1, std::abs(s1[i].mean_p - target1) / target1);
      }
      if (s2[i].n_j >= 1000) {
        ++mid;
        lo = std::min(lo, s2[i].max_norm);
        hi = std::max(hi, s2[i].max_norm);
      }
    }
  }
  const bool ok = big > 0 && mid > 0 && worst2 <= 0.05 && worst1 <= 0.05 && lo >= 0.5 && hi <= 3.0;
  return {ok, "max rel dev mean|g|^2 " + f3(worst2) + ", mean|g| " + f3(worst1) + " (<= 0.05, " + std::to_string(big) +
                  " scales); max|g|/sqrt(log n_j) in [" + f3(lo) + ", " + f3(hi) + "] (within [0.5, 3.0], " +
                  std::to_string(mid) + " scales); with edge-wrapping coefficients max " + f3(hi_all)};
}

Outcome pseudonorm_independence(std::size_t n, int reps) {
  auto a = make_spec({1.2, 0.8}, 0.4, n, 1.0 / n, 77);
  auto b = a;
  b.rho = integral_pseudonorm(AnisotropyMatrix(diag_matrix({1.2, 0.8})).transposed());
  DiagonalAnisotropy D({1.2, 0.8});
  auto x = alphas(SpectralSynthesizer(a).realize_batch(0, reps), D);
  auto y = alphas(SpectralSynthesizer(b).realize_batch(0, reps), D);
  const double diff = std::abs(mean(x) - mean(y)), bound = sem(x) + sem(y);
  return {diff <= bound, "alpha_hat diagonal " + f3(mean(x)) + " +- " + f3(sem(x)) + ", integral " + f3(mean(y)) +
                             " +- " + f3(sem(y)) + ", |diff| " + f3(diff) + " (<= " + f3(bound) + ")"};
}

}  // namespace

int main() {
  int failed = 0;
  auto run = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  };

  run(1, "pseudo-norm homogeneity", homogeneity);
  run(2, "polar roundtrip", polar_roundtrip);
  run(3, "Jordan decomposition", jordan);
  run(4, "wavelet orthonormality", wavelet_orthonormality);
  run(5, "index-set combinatorics", combinatorics);
  run(6, "isotropic sanity", isotropic_sanity);
  run(7, "operator-scaling law", operator_scaling);
  run(8, "coefficient variance scaling", variance_scaling);
  {
    auto fields = SpectralSynthesizer(make_spec({1.2, 0.8}, 0.4, kLarge, 1.0 / kLarge, 5)).realize_batch(0, 8);
    run(9, "exponent formulas", [&] { return exponent_formulas(fields); });
    run(11, "normalized-coefficient statistics",
        [&] { return normalized_stats(std::vector<FieldRealization>(fields.begin(), fields.begin() + 2)); });
  }
  run(10, "anisotropy search", [] { return search(20, 4); });
  run(12, "pseudo-norm independence", [] { return pseudonorm_independence(256, 16); });
  std::printf("%d of 12 criteria failed\n", failed);
  return failed ? 1 : 0;
}
