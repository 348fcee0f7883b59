#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "osgrf/wavelet.hpp"

namespace osgrf {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct BesovSpec {
  double s = 0;
  double p = 2;
  double q = 2;
  double beta = 0;
  DiagonalAnisotropy anisotropy;

  void validate() const {
    if (!(p >= 1) || !(q >= 1)) throw Error(ErrorKind::domain, "p and q must be at least 1");
    if (!std::isfinite(s) || !std::isfinite(beta)) throw Error(ErrorKind::domain, "s and beta must be finite");
  }
};

struct ScaleSum {
  int j = 0;
  double S = 0;         // (sum |c|^p)^{1/p}, or max |c| for p = inf
  std::size_t n = 0;    // number of coefficients at scale j
};

// Per-scale p-sums over every branch of I^j.
inline std::vector<ScaleSum> scale_sums(const WaveletCoefficientSet& set, double p) {
  if (!(p >= 1)) throw Error(ErrorKind::domain, "p must be at least 1");
  std::vector<ScaleSum> out;
  for (int j = 0; j <= set.j_max(); ++j) out.push_back({j, 0.0, 0});
  for (const auto& b : set.branches) {
    auto& s = out[b.j];
    for (double v : b.values.data) {
      double a = std::abs(v);
      if (std::isinf(p))
        s.S = std::max(s.S, a);
      else
        s.S += std::pow(a, p);
    }
    s.n += b.values.size();
  }
  if (!std::isinf(p))
    for (auto& s : out) s.S = std::pow(s.S, 1.0 / p);
  return out;
}

// Every branch of every scale up to j_max must be present.
inline void require_contiguous(const WaveletCoefficientSet& set) {
  for (int j = 0; j <= set.j_max(); ++j)
    for (const auto& p : grid_index_set(set.anisotropy, j, set.levels))
      if (!set.find(j, p)) throw Error(ErrorKind::domain, "coefficient set is missing scale " + std::to_string(j));
}

inline double besov_norm(const std::vector<ScaleSum>& sums, const BesovSpec& spec, int d) {
  spec.validate();
  const double dp = std::isinf(spec.p) ? 0.0 : d / spec.p;
  double acc = 0;
  for (const auto& s : sums) {
    const double jj = std::max(s.j, 1);
    if (std::isinf(spec.q)) {
      acc = std::max(acc, std::pow(jj, -spec.beta) * std::exp2(s.j * (spec.s - dp)) * s.S);
    } else {
      acc += std::pow(jj, -spec.beta * spec.q) * std::exp2(s.j * (spec.s - dp) * spec.q) * std::pow(s.S, spec.q);
    }
  }
  return std::isinf(spec.q) ? acc : std::pow(acc, 1.0 / spec.q);
}

inline double besov_norm(const WaveletCoefficientSet& set, const BesovSpec& spec) {
  if (!(spec.anisotropy == set.anisotropy)) throw Error(ErrorKind::domain, "anisotropy differs from the coefficient set");
  require_contiguous(set);
  return besov_norm(scale_sums(set, spec.p), spec, set.anisotropy.dim());
}

// How per-scale sums are normalized before the log-linear fit.
//   count:   log2 S_j - log2(n_j)/p with n_j the coefficient count at scale j
//   nominal: log2 S_j - j d/p
enum class ScaleNormalization { count, nominal };

struct ExponentEstimate {
  DiagonalAnisotropy anisotropy;
  double p = 2, q = 2;
  std::vector<ScaleSum> per_scale;  // scales used in the fit
  std::vector<double> y;            // normalized log2 S_j
  double alpha_hat = 0;
  double slope_stderr = 0;
  double intercept = 0;
  int j_lo = 0, j_hi = 0;
};

// Scales whose index sets are neither clamped by the grid depth nor missing
// a branch type.
inline std::vector<int> usable_scales(const DiagonalAnisotropy& D, const std::vector<int>& levels) {
  std::vector<int> js;
  const std::size_t types = (std::size_t{1} << D.dim()) - 1;
  for (int j = 1; scale_unclamped(D, j, levels); ++j) {
    std::vector<std::string> seen;
    for (const auto& p : grid_index_set(D, j, levels))
      if (std::find(seen.begin(), seen.end(), p.G) == seen.end()) seen.push_back(p.G);
    if (seen.size() == types) js.push_back(j);
  }
  return js;
}

struct LineFit {
  double slope = 0, intercept = 0, slope_stderr = 0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) ssr += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
  f.slope_stderr = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
  return f;
}

struct EstimateOptions {
  std::optional<std::pair<int, int>> j_range;  // default: usable_scales
  ScaleNormalization normalization = ScaleNormalization::count;
};

inline ExponentEstimate critical_exponent_estimate(const WaveletCoefficientSet& set, double p, double q,
                                                   const EstimateOptions& opt = {}) {
  if (!(p >= 1) || !(q >= 1)) throw Error(ErrorKind::domain, "p and q must be at least 1");
  std::vector<int> js;
  if (opt.j_range) {
    auto [lo, hi] = *opt.j_range;
    for (int j = std::max(lo, 0); j <= std::min(hi, set.j_max()); ++j) js.push_back(j);
  } else {
    for (int j : usable_scales(set.anisotropy, set.levels))
      if (j <= set.j_max()) js.push_back(j);
  }
  if (js.size() < 4) throw Error(ErrorKind::insufficient_data, "fewer than 4 usable scales for the exponent fit");
  auto all = scale_sums(set, p);
  ExponentEstimate est;
  est.anisotropy = set.anisotropy;
  est.p = p;
  est.q = q;
  const int d = set.anisotropy.dim();
  std::vector<double> x;
  for (int j : js) {
    const auto& s = all[j];
    if (s.n == 0) throw Error(ErrorKind::insufficient_data, "scale " + std::to_string(j) + " has no coefficients");
    double y = std::log2(s.S);
    if (!std::isinf(p))
      y -= (opt.normalization == ScaleNormalization::count ? std::log2(static_cast<double>(s.n)) : j * d) / p;
    if (!std::isfinite(y)) throw Error(ErrorKind::numeric, "non-finite scale sum at j = " + std::to_string(j));
    est.per_scale.push_back(s);
    est.y.push_back(y);
    x.push_back(j);
  }
  auto fit = least_squares(x, est.y);
  est.alpha_hat = -fit.slope;
  est.slope_stderr = fit.slope_stderr;
  est.intercept = fit.intercept;
  est.j_lo = js.front();
  est.j_hi = js.back();
  return est;
}

}  // namespace osgrf
