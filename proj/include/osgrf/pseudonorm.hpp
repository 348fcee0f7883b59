#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "osgrf/linalg.hpp"

namespace osgrf {

// Radial profile supported in the annulus r_in <= |y| <= r_out.
struct BumpProfile {
  enum class Shape { smooth, indicator };
  Shape shape = Shape::smooth;
  double r_in = 1.0;
  double r_out = 2.0;

  double operator()(double r) const {
    if (r < r_in || r > r_out) return 0.0;
    if (shape == Shape::indicator) return 1.0;
    double u = (2.0 * r - r_in - r_out) / (r_out - r_in);
    double v = 1.0 - u * u;
    return v <= 0.0 ? 0.0 : std::exp(-1.0 / v);
  }
};

class PseudoNorm {
 public:
  enum class Kind { diagonal_sum, integral, euclidean };

  PseudoNorm() = default;  // Euclidean norm on R^2

  Kind kind() const { return kind_; }
  int dim() const { return E_.dim(); }
  const AnisotropyMatrix& homogeneity() const { return E_; }
  const std::vector<double>& lambda() const { return lambda_; }
  double scale() const { return scale_; }
  const BumpProfile& profile() const { return profile_; }
  double tolerance() const { return tol_; }

  double operator()(const Vector& x) const { return eval(x.data()); }
  double operator()(const std::vector<double>& x) const { return eval(x.data()); }

  double eval(const double* x) const {
    switch (kind_) {
      case Kind::diagonal_sum: {
        double s = 0;
        for (int l = 0; l < dim(); ++l) {
          double a = std::abs(x[l]);
          if (a > 0) s += std::pow(a, inv_lambda_[l]);
        }
        return scale_ * s;
      }
      case Kind::euclidean: {
        double s = 0;
        for (int l = 0; l < dim(); ++l) s += x[l] * x[l];
        return std::sqrt(s);
      }
      case Kind::integral:
        return eval_integral(x);
    }
    return 0.0;
  }

  friend PseudoNorm diagonal_pseudonorm(const std::vector<double>& lambda, double scale);
  friend PseudoNorm integral_pseudonorm(const AnisotropyMatrix& E, const BumpProfile& profile,
                                        double tol);
  friend PseudoNorm euclidean_pseudonorm(int d);

 private:
  // |exp(-tE) x| along the orbit of x. With E = Ms + N (Ms = D + S
  // diagonalized over C, N nilpotent and commuting) the orbit is
  // V exp(-t Lambda) V^{-1} sum_k (-t)^k N^k x / k!.
  struct Orbit {
    Vector z;                                // real path: V^{-1} x
    std::vector<Eigen::VectorXcd> w;         // complex path: V^{-1} N^k x / k!
  };

  Orbit make_orbit(const Vector& x) const {
    Orbit o;
    if (real_diag_) {
      o.z = Vinv_ * x;
    } else {
      Vector nk = x;
      double fact = 1;
      for (int k = 0; k < dim(); ++k) {
        if (k > 0) {
          nk = N_ * nk;
          fact *= k;
          if (nk.cwiseAbs().maxCoeff() == 0.0) break;
        }
        o.w.push_back(Vcinv_ * (nk / fact).cast<cplx>());
      }
    }
    return o;
  }

  double orbit_radius(const Orbit& o, double t) const {
    if (real_diag_) {
      Vector w(o.z.size());
      for (Eigen::Index i = 0; i < o.z.size(); ++i) w(i) = std::exp(-t * eig_(i)) * o.z(i);
      return (V_ * w).norm();
    }
    Eigen::VectorXcd acc = o.w[0];
    double tk = 1;
    for (std::size_t k = 1; k < o.w.size(); ++k) {
      tk *= -t;
      acc += tk * o.w[k];
    }
    for (Eigen::Index i = 0; i < acc.size(); ++i) acc(i) *= std::exp(-t * ceig_(i));
    return (Vc_ * acc).real().norm();
  }

  double eval_integral(const double* xp) const {
    const int d = dim();
    Vector x(d);
    double nx = 0;
    for (int l = 0; l < d; ++l) x(l) = xp[l], nx += xp[l] * xp[l];
    if (nx == 0.0) return 0.0;
    for (int l = 0; l < d; ++l)
      if (!std::isfinite(xp[l])) throw Error(ErrorKind::domain, "pseudo-norm of non-finite point");
    Orbit orbit = make_orbit(x);
    auto r = [&](double t) { return orbit_radius(orbit, t); };
    auto integrand = [&](double t) { return profile_(r(t)) * std::exp(t); };
    const double lr_in = std::log(profile_.r_in), lr_out = std::log(profile_.r_out);
    double t0 = std::log(std::sqrt(nx) / std::sqrt(profile_.r_in * profile_.r_out)) / (E_.trace() / d);
    const double step = 0.5 / E_.rho_max();

    std::vector<double> breaks;
    if (monotone_) {
      double ta = t0, tb = t0;
      double h = step;
      for (int i = 0; r(ta) <= profile_.r_out; ++i, h *= 2) {
        ta -= h;
        if (i > 200) throw Error(ErrorKind::numeric, "integral pseudo-norm: bracketing failed");
      }
      h = step;
      for (int i = 0; r(tb) >= profile_.r_in; ++i, h *= 2) {
        tb += h;
        if (i > 200) throw Error(ErrorKind::numeric, "integral pseudo-norm: bracketing failed");
      }
      breaks.push_back(crossing(r, lr_out, ta, tb));
      breaks.push_back(crossing(r, lr_in, breaks[0], tb));
    } else {
      double ta = t0, tb = t0;
      for (int i = 0; r(ta) <= 4 * profile_.r_out; ++i) {
        ta -= step;
        if (i > 100000) throw Error(ErrorKind::numeric, "integral pseudo-norm: bracketing failed");
      }
      for (int i = 0; r(tb) >= profile_.r_in / 4; ++i) {
        tb += step;
        if (i > 100000) throw Error(ErrorKind::numeric, "integral pseudo-norm: bracketing failed");
      }
      const int n = std::max(400, static_cast<int>((tb - ta) / (0.01 / E_.rho_max())));
      double prev_t = ta, prev_r = r(ta);
      for (int i = 1; i <= n; ++i) {
        double t = ta + (tb - ta) * i / n;
        double rt = r(t);
        for (double lv : {lr_in, lr_out}) {
          double c = std::exp(lv);
          if ((prev_r - c) * (rt - c) < 0) breaks.push_back(crossing(r, lv, prev_t, t));
        }
        prev_t = t;
        prev_r = rt;
      }
      std::sort(breaks.begin(), breaks.end());
    }

    double total = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      double a = breaks[i], b = breaks[i + 1];
      double mid = r(0.5 * (a + b));
      if (mid < profile_.r_in || mid > profile_.r_out) continue;
      if (profile_.shape == BumpProfile::Shape::indicator) {
        total += std::exp(b) - std::exp(a);
      } else {
        double err = 0;
        double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 15,
                                                                                  tol_, &err);
        if (!std::isfinite(v) || err > 1e3 * tol_ * std::max(1.0, std::abs(v)))
          throw Error(ErrorKind::numeric, "integral pseudo-norm: quadrature did not converge");
        total += v;
      }
    }
    return total;
  }

  template <class F>
  static double crossing(const F& r, double log_level, double a, double b) {
    auto g = [&](double t) { return std::log(r(t)) - log_level; };
    double ga = g(a), gb = g(b);
    if (ga == 0) return a;
    if (gb == 0) return b;
    std::uintmax_t iters = 200;
    auto res = boost::math::tools::toms748_solve(g, a, b, ga, gb,
                                                 boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (res.first + res.second);
  }

  Kind kind_ = Kind::euclidean;
  AnisotropyMatrix E_;
  std::vector<double> lambda_, inv_lambda_;
  double scale_ = 1.0;
  BumpProfile profile_;
  double tol_ = 1e-10;
  bool monotone_ = true;
  bool real_diag_ = false;
  Matrix V_, Vinv_, N_;
  Vector eig_;
  CMatrix Vc_, Vcinv_;
  Eigen::VectorXcd ceig_;
};

inline PseudoNorm diagonal_pseudonorm(const std::vector<double>& lambda, double scale = 1.0) {
  if (lambda.empty()) throw Error(ErrorKind::domain, "diagonal pseudo-norm needs at least one exponent");
  for (double l : lambda)
    if (!(l > 0.0) || !std::isfinite(l))
      throw Error(ErrorKind::domain, "diagonal pseudo-norm exponents must be positive");
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw Error(ErrorKind::domain, "diagonal pseudo-norm scale must be positive");
  PseudoNorm p;
  p.kind_ = PseudoNorm::Kind::diagonal_sum;
  p.E_ = AnisotropyMatrix(diag_matrix(lambda));
  p.lambda_ = lambda;
  for (double l : lambda) p.inv_lambda_.push_back(1.0 / l);
  p.scale_ = scale;
  return p;
}

inline PseudoNorm euclidean_pseudonorm(int d) {
  if (d < 1) throw Error(ErrorKind::domain, "dimension must be positive");
  PseudoNorm p;
  p.kind_ = PseudoNorm::Kind::euclidean;
  p.E_ = AnisotropyMatrix(Matrix::Identity(d, d));
  return p;
}

inline PseudoNorm integral_pseudonorm(const AnisotropyMatrix& E, const BumpProfile& profile = {},
                                      double tol = 1e-10) {
  if (!(profile.r_in > 0.0))
    throw Error(ErrorKind::domain, "profile support touches the origin; the integral diverges");
  if (!(profile.r_out > profile.r_in) || !std::isfinite(profile.r_out))
    throw Error(ErrorKind::domain, "profile needs r_in < r_out");
  if (!(tol > 0.0)) throw Error(ErrorKind::domain, "quadrature tolerance must be positive");
  PseudoNorm p;
  p.kind_ = PseudoNorm::Kind::integral;
  p.E_ = E;
  p.profile_ = profile;
  p.tol_ = tol;
  const Matrix& M = E.entries();
  Matrix sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> se(sym);
  p.monotone_ = se.eigenvalues().minCoeff() > 1e-12;
  const auto& J = E.jordan();
  if (E.is_diagonal()) {
    p.real_diag_ = true;
    p.V_ = Matrix::Identity(M.rows(), M.cols());
    p.Vinv_ = p.V_;
    p.eig_ = M.diagonal();
    return p;
  }
  if (max_abs(J.S) <= 1e-12 && max_abs(J.N) <= 1e-12) {
    Eigen::EigenSolver<Matrix> es(M);
    Matrix V = es.eigenvectors().real();
    Eigen::FullPivLU<Matrix> lu(V);
    if (lu.isInvertible() && lu.rcond() > 1e-8) {
      p.real_diag_ = true;
      p.V_ = V;
      p.Vinv_ = lu.inverse();
      p.eig_ = es.eigenvalues().real();
      return p;
    }
  }
  Eigen::ComplexEigenSolver<CMatrix> ces((J.D + J.S).cast<cplx>());
  Eigen::FullPivLU<CMatrix> clu(ces.eigenvectors());
  if (ces.info() != Eigen::Success || !clu.isInvertible())
    throw Error(ErrorKind::numeric, "integral pseudo-norm: cannot diagonalize the semisimple part");
  p.Vc_ = ces.eigenvectors();
  p.Vcinv_ = clu.inverse();
  p.ceig_ = ces.eigenvalues();
  p.N_ = J.N;
  return p;
}

struct PolarPoint {
  double r = 0;
  Vector theta;
};

inline PolarPoint polar_decompose(const PseudoNorm& rho, const Vector& x) {
  if (x.size() != rho.dim()) throw Error(ErrorKind::domain, "polar_decompose: dimension mismatch");
  if (x.norm() == 0.0) throw Error(ErrorKind::domain, "polar_decompose: x must be nonzero");
  const Matrix& E = rho.homogeneity().entries();
  auto g = [&](double s) { return std::log(rho(Vector(matrix_exp(-s * E) * x))); };
  double s0 = std::log(rho(x));
  double a = s0 - 1, b = s0 + 1;
  double ga = g(a), gb = g(b);
  for (int i = 0; i < 60 && ga < 0; ++i) a -= 1 << std::min(i, 10), ga = g(a);
  for (int i = 0; i < 60 && gb > 0; ++i) b += 1 << std::min(i, 10), gb = g(b);
  if (!(ga >= 0 && gb <= 0)) throw Error(ErrorKind::numeric, "polar_decompose: root bracketing failed");
  std::uintmax_t iters = 200;
  auto res = boost::math::tools::toms748_solve(g, a, b, ga, gb,
                                               boost::math::tools::eps_tolerance<double>(52), iters);
  double s = 0.5 * (res.first + res.second);
  PolarPoint p;
  p.r = std::exp(s);
  p.theta = matrix_exp(-s * E) * x;
  return p;
}

inline Vector polar_compose(const PseudoNorm& rho, const PolarPoint& p) {
  return matrix_power(rho.homogeneity().entries(), p.r) * p.theta;
}

namespace detail {

// Direction uniform on the sphere, radius log-uniform in [lo, hi].
inline Vector sample_point(std::mt19937_64& gen, int d, double lo, double hi) {
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Vector v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = n(gen);
  } while (v.norm() == 0.0);
  return v / v.norm() * std::exp(u(gen));
}

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace detail

struct EquivalenceReport {
  double c_low = 0;
  double c_high = 0;
  double log_exponent_fit = 0;
};

inline EquivalenceReport equivalence_constants(const PseudoNorm& rho1, const PseudoNorm& rho2,
                                               int samples, std::uint64_t seed = 1) {
  if (rho1.dim() != rho2.dim()) throw Error(ErrorKind::domain, "pseudo-norms of different dimension");
  if (samples < 100) throw Error(ErrorKind::domain, "need at least 100 samples");
  const Matrix& D1 = rho1.homogeneity().jordan().D;
  const Matrix& D2 = rho2.homogeneity().jordan().D;
  if (max_abs(D1 - D2) > 1e-8 * std::max(1.0, max_abs(D1)))
    throw Error(ErrorKind::domain, "pseudo-norms do not share the real diagonalizable part");
  std::mt19937_64 gen(seed);
  EquivalenceReport rep;
  rep.c_low = std::numeric_limits<double>::infinity();
  rep.c_high = 0;
  std::vector<double> u, lr;
  for (int i = 0; i < samples; ++i) {
    Vector x = detail::sample_point(gen, rho1.dim(), 1e-4, 1e4);
    double a = rho1(x), b = rho2(x);
    double ratio = a / b;
    rep.c_low = std::min(rep.c_low, ratio);
    rep.c_high = std::max(rep.c_high, ratio);
    u.push_back(std::log(1.0 + std::abs(std::log(b))));
    lr.push_back(std::abs(std::log(ratio)));
  }
  const Matrix& M1 = rho1.homogeneity().entries();
  const Matrix& M2 = rho2.homogeneity().entries();
  if (max_abs(M1 - M2) > 1e-12 * std::max(1.0, max_abs(M1))) {
    // Envelope of |log ratio| against log(1 + |log rho2|), in equal-width bins.
    const int bins = 16;
    double umax = *std::max_element(u.begin(), u.end());
    std::vector<double> env(bins, -1), cnt(bins, 0);
    for (std::size_t i = 0; i < u.size(); ++i) {
      int b = std::min(bins - 1, static_cast<int>(u[i] / umax * bins));
      env[b] = std::max(env[b], lr[i]);
      cnt[b] += 1;
    }
    std::vector<double> bx, by;
    for (int b = 0; b < bins; ++b)
      if (cnt[b] >= 5) bx.push_back((b + 0.5) * umax / bins), by.push_back(env[b]);
    rep.log_exponent_fit = bx.size() >= 2 ? detail::slope(bx, by) : 0.0;
  }
  return rep;
}

struct TriangleReport {
  double constant = 0;
  std::vector<std::pair<int, double>> running_max;  // (samples so far, max ratio)
};

// Empirical C in rho(x+y) <= C (rho(x) + rho(y)).
inline TriangleReport quasi_triangle_constant(const PseudoNorm& rho, int samples, std::uint64_t seed = 1) {
  std::mt19937_64 gen(seed);
  TriangleReport rep;
  int next = 100;
  for (int i = 1; i <= samples; ++i) {
    Vector x = detail::sample_point(gen, rho.dim(), 1e-2, 1e2);
    Vector y = detail::sample_point(gen, rho.dim(), 1e-2, 1e2);
    double ratio = rho(Vector(x + y)) / (rho(x) + rho(y));
    rep.constant = std::max(rep.constant, ratio);
    if (i == next || i == samples) {
      rep.running_max.emplace_back(i, rep.constant);
      next *= 10;
    }
  }
  return rep;
}

}  // namespace osgrf
