#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <vector>

#include "osgrf/core.hpp"
#include "osgrf/linalg.hpp"
#include "osgrf/pseudonorm.hpp"
#include "osgrf/rng.hpp"

namespace osgrf {

struct GridGeometry {
  std::vector<std::size_t> n;
  std::vector<double> spacing;
};

struct SpectralSettings {
  std::vector<std::size_t> lattice;  // empty: same as the grid
  int rings = 8;
};

struct FieldSpec {
  AnisotropyMatrix E0;
  double H0 = 0.5;
  PseudoNorm rho;
  GridGeometry grid;
  SpectralSettings spectral;
  std::uint64_t seed = 0;

  int dim() const { return E0.dim(); }

  std::vector<std::size_t> lattice() const {
    return spectral.lattice.empty() ? grid.n : spectral.lattice;
  }

  void validate() const {
    const int d = dim();
    if (std::abs(E0.trace() - d) > 1e-10) {
      std::ostringstream os;
      os << "E0 must have trace " << d << " (got " << E0.trace() << ")";
      throw Error(ErrorKind::invalid_spec, os.str());
    }
    if (!(H0 > 0.0) || !(H0 < E0.rho_min())) {
      std::ostringstream os;
      os << "the field exists only for 0 < H0 < rho_min(E0) = " << E0.rho_min() << " (got H0 = " << H0 << ")";
      throw Error(ErrorKind::invalid_spec, os.str());
    }
    if (rho.dim() != d) throw Error(ErrorKind::invalid_spec, "pseudo-norm dimension differs from E0");
    if (max_abs(rho.homogeneity().entries() - E0.entries().transpose()) > 1e-10)
      throw Error(ErrorKind::invalid_spec, "pseudo-norm homogeneity matrix must equal the transpose of E0");
    if (static_cast<int>(grid.n.size()) != d || static_cast<int>(grid.spacing.size()) != d)
      throw Error(ErrorKind::invalid_spec, "grid needs one size and one spacing per axis");
    for (int r = 0; r < d; ++r) {
      if (grid.n[r] < 2) throw Error(ErrorKind::invalid_spec, "grid needs at least 2 nodes per axis");
      if (!(grid.spacing[r] > 0.0) || !std::isfinite(grid.spacing[r]))
        throw Error(ErrorKind::invalid_spec, "grid spacing must be positive");
    }
    auto N = lattice();
    if (static_cast<int>(N.size()) != d) throw Error(ErrorKind::invalid_spec, "lattice needs one size per axis");
    for (int r = 0; r < d; ++r)
      if (N[r] < grid.n[r])
        throw Error(ErrorKind::configuration, "frequency lattice is smaller than the grid on some axis");
    if (spectral.rings < 0) throw Error(ErrorKind::invalid_spec, "number of rings must be non-negative");
  }
};

inline FieldSpec default_spec() {
  FieldSpec s;
  s.E0 = AnisotropyMatrix(Matrix::Identity(2, 2));
  s.H0 = 0.5;
  s.rho = euclidean_pseudonorm(2);
  s.grid = {{256, 256}, {1.0 / 256, 1.0 / 256}};
  s.spectral = {{256, 256}, 8};
  return s;
}

struct FieldRealization {
  NdArray values;
  FieldSpec spec;
  std::uint64_t replicate = 0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place unnormalized inverse DFT (exponent +i) of a row-major array.
inline void inverse_dft(std::vector<std::complex<double>>& a, const std::vector<std::size_t>& dims) {
  std::vector<int> n(dims.begin(), dims.end());
  auto* buf = reinterpret_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * a.size()));
  if (!buf) throw Error(ErrorKind::numeric, "fftw allocation failed");
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft(static_cast<int>(n.size()), n.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  std::copy(a.begin(), a.end(), reinterpret_cast<std::complex<double>*>(buf));
  fftw_execute(plan);
  std::copy(reinterpret_cast<std::complex<double>*>(buf), reinterpret_cast<std::complex<double>*>(buf) + a.size(),
            a.begin());
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
}

// Advances a multi-index over box [0, dims); returns false after the last.
inline bool next_index(std::vector<std::size_t>& idx, const std::vector<std::size_t>& dims) {
  for (std::size_t r = idx.size(); r-- > 0;) {
    if (++idx[r] < dims[r]) return true;
    idx[r] = 0;
  }
  return false;
}

}  // namespace detail

// Riemann-sum discretization of the harmonizable integral on a frequency
// lattice, with the origin cell replaced by dyadic rings. Cell weights are
// computed once per spec and reused by every replicate.
class SpectralSynthesizer {
 public:
  struct RingCell {
    std::vector<double> xi;
    double weight = 0;
    std::uint64_t id = 0;
    bool representative = false;
    bool self_conjugate = false;
  };

  explicit SpectralSynthesizer(FieldSpec spec, double refine_threshold = 1.05) : spec_(std::move(spec)) {
    spec_.validate();
    refine_threshold_ = refine_threshold;
    d_ = spec_.dim();
    N_ = spec_.lattice();
    total_ = NdArray::count(N_);
    dxi_.resize(d_);
    for (int r = 0; r < d_; ++r)
      dxi_[r] = 2.0 * std::numbers::pi / (static_cast<double>(N_[r]) * spec_.grid.spacing[r]);
    build_lattice_weights();
    build_rings();
  }

  const FieldSpec& spec() const { return spec_; }
  const std::vector<double>& lattice_weights() const { return w_; }
  const std::vector<RingCell>& ring_cells() const { return rings_; }

  // Spectral density |xi|-weighting target rho(xi)^{-2H0-Tr(E0)}.
  double density(const double* xi) const {
    double r = spec_.rho.eval(xi);
    return std::pow(r, -2.0 * spec_.H0 - spec_.E0.trace());
  }

  // Frequency of lattice cell with FFT-ordered index i along axis r.
  double lattice_freq(int r, std::size_t i) const {
    long m = i <= (N_[r] - 1) / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(N_[r]);
    return static_cast<double>(m) * dxi_[r];
  }

  FieldRealization realize(std::uint64_t replicate) const {
    const std::uint64_t seed = spec_.seed;
    std::vector<std::complex<double>> A(total_);
    std::vector<std::size_t> idx(d_, 0), mir(d_);
    for (std::size_t f = 0; f < total_; ++f, detail::next_index(idx, N_)) {
      if (f == 0) continue;
      for (int r = 0; r < d_; ++r) mir[r] = (N_[r] - idx[r]) % N_[r];
      std::size_t mf = flat_lattice(mir);
      if (mf < f) continue;
      if (mf == f) {
        A[f] = w_[f] * real_gaussian(seed, replicate, f);
      } else {
        auto g = complex_gaussian(seed, replicate, f);
        A[f] = w_[f] * g;
        A[mf] = w_[f] * std::conj(g);
      }
    }
    detail::inverse_dft(A, N_);

    FieldRealization out;
    out.spec = spec_;
    out.replicate = replicate;
    out.values = NdArray(spec_.grid.n);
    const double y0 = A[0].real();
    std::vector<std::size_t> gi(d_, 0);
    for (std::size_t f = 0; f < out.values.size(); ++f, detail::next_index(gi, spec_.grid.n))
      out.values[f] = A[flat_lattice(gi)].real() - y0;

    add_rings(out.values, seed, replicate);
    out.values[0] = 0.0;
    return out;
  }

  std::vector<FieldRealization> realize_batch(std::uint64_t first, std::size_t count, unsigned threads = 1) const {
    std::vector<FieldRealization> out(count);
    parallel_for(count, threads, [&](std::size_t i) { out[i] = realize(first + i); });
    return out;
  }

  // Exact E|X(x+h) - X(x)|^2 of the discretized field, h in physical units.
  double expected_increment_variance(const std::vector<double>& h) const {
    double s = 0;
    std::vector<std::size_t> idx(d_, 0);
    for (std::size_t f = 0; f < total_; ++f, detail::next_index(idx, N_)) {
      if (w_[f] == 0) continue;
      double ph = 0;
      for (int r = 0; r < d_; ++r) ph += h[r] * lattice_freq(r, idx[r]);
      s += w_[f] * w_[f] * (2.0 - 2.0 * std::cos(ph));
    }
    for (const auto& c : rings_) {
      double ph = 0;
      for (int r = 0; r < d_; ++r) ph += h[r] * c.xi[r];
      s += c.weight * c.weight * (2.0 - 2.0 * std::cos(ph));
    }
    return s;
  }

 private:
  std::size_t flat_lattice(const std::vector<std::size_t>& idx) const {
    std::size_t f = 0;
    for (int r = 0; r < d_; ++r) f = f * N_[r] + idx[r];
    return f;
  }

  int subdivisions() const { return d_ <= 2 ? 8 : (d_ == 3 ? 4 : 2); }

  // Weight^2 of a box: integral of |xi|^2 f(xi) over the box divided by
  // |centre|^2, by an s^d midpoint rule. Matches the second moment of the
  // cell to the low-frequency behaviour of (2 - 2cos<h, xi>).
  double moment_matched(const std::vector<double>& c, const std::vector<double>& side) const {
    const int s = subdivisions();
    std::vector<std::size_t> dims(d_, s), k(d_, 0);
    std::vector<double> xi(d_);
    double vol = 1, c2 = 0;
    for (int r = 0; r < d_; ++r) vol *= side[r] / s, c2 += c[r] * c[r];
    double acc = 0;
    do {
      double x2 = 0;
      for (int r = 0; r < d_; ++r) {
        xi[r] = c[r] + (static_cast<double>(k[r]) + 0.5 - 0.5 * s) * side[r] / s;
        x2 += xi[r] * xi[r];
      }
      acc += x2 * density(xi.data()) * vol;
    } while (detail::next_index(k, dims));
    return acc / c2;
  }

  void build_lattice_weights() {
    w_.assign(total_, 0.0);
    // Density on the corner lattice, corner c along axis r at (m_min + c - 1/2) dxi.
    std::vector<std::size_t> cdims(d_);
    std::vector<long> mmin(d_);
    for (int r = 0; r < d_; ++r) cdims[r] = N_[r] + 1, mmin[r] = -static_cast<long>(N_[r] / 2);
    NdArray corner(cdims);
    std::vector<std::size_t> ci(d_, 0);
    std::vector<double> xi(d_);
    for (std::size_t f = 0; f < corner.size(); ++f, detail::next_index(ci, cdims)) {
      bool origin = true;
      for (int r = 0; r < d_; ++r) {
        xi[r] = (static_cast<double>(mmin[r] + static_cast<long>(ci[r])) - 0.5) * dxi_[r];
        origin = origin && xi[r] == 0.0;
      }
      corner[f] = origin ? std::numeric_limits<double>::infinity() : density(xi.data());
    }
    double vol = 1;
    for (int r = 0; r < d_; ++r) vol *= dxi_[r];
    std::vector<std::size_t> idx(d_, 0), cc(d_);
    std::vector<std::size_t> two(d_, 2), k(d_);
    for (std::size_t f = 0; f < total_; ++f, detail::next_index(idx, N_)) {
      if (f == 0) continue;
      for (int r = 0; r < d_; ++r) xi[r] = lattice_freq(r, idx[r]);
      double fc = density(xi.data());
      double lo = fc, hi = fc;
      std::fill(k.begin(), k.end(), 0);
      do {
        for (int r = 0; r < d_; ++r) {
          long m = std::lround(xi[r] / dxi_[r]);
          cc[r] = static_cast<std::size_t>(m - mmin[r]) + k[r];
        }
        double v = corner[corner.flat(cc)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      } while (detail::next_index(k, two));
      double w2;
      if (std::isfinite(hi) && hi <= refine_threshold_ * lo) {
        w2 = fc * vol;
      } else {
        w2 = moment_matched(xi, dxi_);
      }
      w_[f] = std::sqrt(w2);
    }
  }

  void build_rings() {
    rings_.clear();
    const std::size_t per_ring = static_cast<std::size_t>(std::pow(4, d_));
    std::vector<std::size_t> four(d_, 4), a(d_, 0);
    for (int l = 1; l <= spec_.spectral.rings; ++l) {
      std::vector<double> side(d_);
      for (int r = 0; r < d_; ++r) side[r] = dxi_[r] / std::ldexp(1.0, l + 1);
      std::fill(a.begin(), a.end(), 0);
      std::size_t local = 0;
      do {
        bool inner = true;
        for (int r = 0; r < d_; ++r) inner = inner && (a[r] == 1 || a[r] == 2);
        if (!inner) {
          RingCell c;
          c.xi.resize(d_);
          std::size_t mirror = 0;
          for (int r = 0; r < d_; ++r) {
            c.xi[r] = (static_cast<double>(a[r]) - 1.5) * side[r];
            mirror = mirror * 4 + (3 - a[r]);
          }
          c.weight = std::sqrt(moment_matched(c.xi, side));
          c.id = total_ + static_cast<std::uint64_t>(l - 1) * per_ring + local;
          c.representative = local < mirror;
          rings_.push_back(c);
        }
        ++local;
      } while (detail::next_index(a, four));
    }
  }

  void add_rings(NdArray& X, std::uint64_t seed, std::uint64_t replicate) const {
    const auto& n = spec_.grid.n;
    std::vector<std::vector<std::complex<double>>> phase(d_);
    for (const auto& c : rings_) {
      if (!c.representative) continue;
      std::complex<double> z = c.weight * complex_gaussian(seed, replicate, c.id);
      for (int r = 0; r < d_; ++r) {
        phase[r].resize(n[r]);
        for (std::size_t i = 0; i < n[r]; ++i)
          phase[r][i] = std::polar(1.0, static_cast<double>(i) * spec_.grid.spacing[r] * c.xi[r]);
      }
      const double base = 2.0 * z.real();
      std::vector<std::size_t> gi(d_, 0);
      for (std::size_t f = 0; f < X.size(); ++f, detail::next_index(gi, n)) {
        std::complex<double> e = z;
        for (int r = 0; r < d_; ++r) e *= phase[r][gi[r]];
        X[f] += 2.0 * e.real() - base;
      }
    }
  }

  FieldSpec spec_;
  double refine_threshold_ = 1.05;
  int d_ = 2;
  std::vector<std::size_t> N_;
  std::size_t total_ = 0;
  std::vector<double> dxi_;
  std::vector<double> w_;
  std::vector<RingCell> rings_;
};

inline FieldRealization synthesize_field(const FieldSpec& spec, std::uint64_t replicate) {
  return SpectralSynthesizer(spec).realize(replicate);
}

struct Variogram {
  std::vector<std::vector<double>> lags;
  std::vector<double> v;
  std::vector<double> stderr_;
};

namespace detail {

inline void check_same_grid(const std::vector<FieldRealization>& fields) {
  if (fields.empty()) throw Error(ErrorKind::domain, "no realizations");
  const auto& s0 = fields[0].spec;
  for (const auto& f : fields) {
    if (f.values.shape != fields[0].values.shape || f.spec.grid.spacing != s0.grid.spacing ||
        max_abs(f.spec.E0.entries() - s0.E0.entries()) != 0.0 || f.spec.H0 != s0.H0)
      throw Error(ErrorKind::domain, "realizations do not share one spec");
  }
}

inline std::vector<long> lag_steps(const FieldRealization& f, const std::vector<double>& h) {
  const auto& sp = f.spec.grid.spacing;
  if (h.size() != sp.size()) throw Error(ErrorKind::domain, "lag dimension differs from the grid");
  std::vector<long> s(h.size());
  for (std::size_t r = 0; r < h.size(); ++r) {
    double q = h[r] / sp[r];
    long k = std::lround(q);
    if (std::abs(q - static_cast<double>(k)) > 1e-9 * std::max(1.0, std::abs(q)))
      throw Error(ErrorKind::domain, "lag is not on the grid");
    if (static_cast<std::size_t>(std::abs(k)) >= f.values.shape[r])
      throw Error(ErrorKind::domain, "lag exceeds the grid extent");
    s[r] = k;
  }
  return s;
}

// Mean of (X(x+s) - X(x))^2 over all base points with both ends on the grid.
inline double mean_square_increment(const NdArray& X, const std::vector<long>& s) {
  const std::size_t d = X.rank();
  std::vector<std::size_t> lo(d), cnt(d), stride(d);
  std::size_t st = 1;
  long off = 0;
  for (std::size_t r = d; r-- > 0;) {
    stride[r] = st;
    st *= X.shape[r];
  }
  for (std::size_t r = 0; r < d; ++r) {
    lo[r] = s[r] < 0 ? static_cast<std::size_t>(-s[r]) : 0;
    cnt[r] = X.shape[r] - static_cast<std::size_t>(std::abs(s[r]));
    off += s[r] * static_cast<long>(stride[r]);
  }
  std::vector<std::size_t> k(d, 0);
  double acc = 0;
  std::size_t n = 0;
  // Innermost axis handled as a contiguous run.
  std::vector<std::size_t> outer(cnt.begin(), cnt.end() - 1);
  std::vector<std::size_t> ko(outer.size(), 0);
  do {
    std::size_t base = lo[d - 1];
    for (std::size_t r = 0; r + 1 < d; ++r) base += (lo[r] + ko[r]) * stride[r];
    const double* p = X.data.data() + base;
    const double* q = p + off;
    for (std::size_t i = 0; i < cnt[d - 1]; ++i) {
      double diff = q[i] - p[i];
      acc += diff * diff;
    }
    n += cnt[d - 1];
  } while (!outer.empty() && next_index(ko, outer));
  return acc / static_cast<double>(n);
}

}  // namespace detail

inline Variogram variogram_estimate(const std::vector<FieldRealization>& fields,
                                    const std::vector<std::vector<double>>& lags) {
  if (fields.size() < 2) throw Error(ErrorKind::domain, "variogram needs at least 2 realizations");
  detail::check_same_grid(fields);
  Variogram out;
  for (const auto& h : lags) {
    auto s = detail::lag_steps(fields[0], h);
    std::vector<double> per;
    for (const auto& f : fields) per.push_back(detail::mean_square_increment(f.values, s));
    double m = 0;
    for (double x : per) m += x;
    m /= per.size();
    double var = 0;
    for (double x : per) var += (x - m) * (x - m);
    var /= (per.size() - 1);
    out.lags.push_back(h);
    out.v.push_back(m);
    out.stderr_.push_back(std::sqrt(var / per.size()));
  }
  return out;
}

struct PowerLawFit {
  double slope = 0;
  double intercept = 0;
  double slope_stderr = 0;
};

// Least-squares fit of log v = slope * log |h| + c over the nonzero lags.
inline PowerLawFit power_law_fit(const Variogram& vg) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < vg.lags.size(); ++i) {
    double n2 = 0;
    for (double c : vg.lags[i]) n2 += c * c;
    if (n2 == 0 || vg.v[i] <= 0) continue;
    x.push_back(0.5 * std::log(n2));
    y.push_back(std::log(vg.v[i]));
  }
  if (x.size() < 2) throw Error(ErrorKind::insufficient_data, "power-law fit needs two nonzero lags");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  PowerLawFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - f.intercept - f.slope * x[i];
    rss += e * e;
  }
  f.slope_stderr = x.size() > 2 ? std::sqrt(rss / (x.size() - 2) / sxx) : 0.0;
  return f;
}

struct ScalingLag {
  std::vector<double> h;       // base lag, physical units
  std::vector<double> target;  // a^{E0} h
  double v_h = 0;
  double v_target = 0;
  double ratio = 0;     // v_target / v_h
  double expected = 0;  // a^{2 H0}
  double discrepancy = 0;
};

struct ScalingReport {
  double a = 1;
  std::vector<ScalingLag> lags;
  double H_hat = 0;
  double max_discrepancy = 0;
  double tolerance = 0.05;
  bool pass = false;
};

struct ScalingOptions {
  std::vector<long> axis_steps{8, 16};  // base lags along each axis, in grid steps
  double tolerance = 0.05;
  unsigned threads = 1;
};

inline ScalingReport scaling_law_check(const std::vector<FieldRealization>& fields, double a,
                                       const ScalingOptions& opt = {}) {
  if (!(a > 0.0)) throw Error(ErrorKind::domain, "scale factor must be positive");
  if (fields.size() < 2) throw Error(ErrorKind::domain, "scaling check needs at least 2 realizations");
  detail::check_same_grid(fields);
  const FieldSpec& spec = fields[0].spec;
  const int d = spec.dim();
  const auto& sp = spec.grid.spacing;
  Matrix aE = matrix_power(spec.E0.entries(), a);

  std::map<std::vector<long>, double> cache;
  auto v_int = [&](const std::vector<long>& s) {
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
    for (int r = 0; r < d; ++r)
      if (static_cast<std::size_t>(std::abs(s[r])) >= spec.grid.n[r])
        throw Error(ErrorKind::configuration, "scaled lag does not fit on the grid");
    std::vector<double> per(fields.size());
    parallel_for(fields.size(), opt.threads,
                 [&](std::size_t i) { per[i] = detail::mean_square_increment(fields[i].values, s); });
    double m = 0;
    for (double x : per) m += x;
    m /= per.size();
    cache[s] = m;
    return m;
  };
  // Multilinear interpolation on the integer lag lattice.
  auto v_at = [&](const std::vector<double>& steps) {
    std::vector<long> base(d);
    std::vector<double> frac(d);
    for (int r = 0; r < d; ++r) {
      double fl = std::floor(steps[r] + 1e-12);
      base[r] = static_cast<long>(fl);
      frac[r] = std::max(0.0, steps[r] - fl);
      if (frac[r] < 1e-12) frac[r] = 0;
    }
    double acc = 0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double w = 1;
      std::vector<long> s = base;
      for (int r = 0; r < d; ++r) {
        bool up = (corner >> r) & 1;
        w *= up ? frac[r] : 1.0 - frac[r];
        if (up) s[r] += 1;
      }
      if (w != 0) acc += w * v_int(s);
    }
    return acc;
  };

  ScalingReport rep;
  rep.a = a;
  rep.tolerance = opt.tolerance;
  const double expected = std::pow(a, 2.0 * spec.H0);
  double hsum = 0;
  for (int r = 0; r < d; ++r) {
    for (long k : opt.axis_steps) {
      ScalingLag L;
      L.h.assign(d, 0.0);
      L.h[r] = static_cast<double>(k) * sp[r];
      Vector hv = Eigen::Map<const Vector>(L.h.data(), d);
      Vector t = aE * hv;
      L.target.assign(t.data(), t.data() + d);
      std::vector<double> hs(d), ts(d);
      for (int q = 0; q < d; ++q) hs[q] = L.h[q] / sp[q], ts[q] = L.target[q] / sp[q];
      L.v_h = v_at(hs);
      L.v_target = v_at(ts);
      L.ratio = L.v_target / L.v_h;
      L.expected = expected;
      L.discrepancy = std::abs(L.ratio / expected - 1.0);
      rep.max_discrepancy = std::max(rep.max_discrepancy, L.discrepancy);
      if (a != 1.0) hsum += std::log(L.ratio) / (2.0 * std::log(a));
      rep.lags.push_back(L);
    }
  }
  if (a == 1.0) {
    rep.H_hat = std::numeric_limits<double>::quiet_NaN();
    rep.pass = rep.max_discrepancy <= opt.tolerance;
  } else {
    rep.H_hat = hsum / static_cast<double>(rep.lags.size());
    rep.pass = std::abs(rep.H_hat - spec.H0) <= opt.tolerance;
  }
  return rep;
}

inline ScalingReport scaling_law_check(const FieldSpec& spec, double a, int replicates,
                                       const ScalingOptions& opt = {}) {
  if (replicates < 2) throw Error(ErrorKind::domain, "scaling check needs at least 2 replicates");
  SpectralSynthesizer syn(spec);
  auto fields = syn.realize_batch(0, static_cast<std::size_t>(replicates), opt.threads);
  return scaling_law_check(fields, a, opt);
}

}  // namespace osgrf
