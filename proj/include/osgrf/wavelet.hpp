#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "osgrf/core.hpp"
#include "osgrf/linalg.hpp"
#include "osgrf/synthesis.hpp"

namespace osgrf {

// ---------------------------------------------------------------- filters

struct WaveletFilter {
  int order = 0;           // vanishing moments
  std::vector<double> lo;  // scaling filter, sum = sqrt(2)
  std::vector<double> hi;  // wavelet filter, hi[n] = (-1)^n lo[L-1-n]
};

inline std::vector<double> quadrature_mirror(const std::vector<double>& lo) {
  const std::size_t L = lo.size();
  std::vector<double> hi(L);
  for (std::size_t n = 0; n < L; ++n) hi[n] = (n % 2 ? -1.0 : 1.0) * lo[L - 1 - n];
  return hi;
}

// max |sum_n lo[n] lo[n+2k] - delta_k| over k, plus the low/high cross terms.
inline double orthonormality_residual(const WaveletFilter& f) {
  const long L = static_cast<long>(f.lo.size());
  double worst = 0;
  for (long k = -(L / 2); k <= L / 2; ++k) {
    double aa = 0, bb = 0, ab = 0;
    for (long n = 0; n < L; ++n) {
      long m = n + 2 * k;
      if (m < 0 || m >= L) continue;
      aa += f.lo[n] * f.lo[m];
      bb += f.hi[n] * f.hi[m];
      ab += f.lo[n] * f.hi[m];
    }
    double target = k == 0 ? 1.0 : 0.0;
    worst = std::max({worst, std::abs(aa - target), std::abs(bb - target), std::abs(ab)});
  }
  return worst;
}

// Minimum-phase Daubechies filter with `order` vanishing moments, by
// spectral factorization of P(y) = sum_k C(N-1+k, k) y^k.
inline WaveletFilter daubechies(int order) {
  if (order < 1 || order > 10) throw Error(ErrorKind::configuration, "filter order must be in [1, 10]");
  const int N = order;
  std::vector<std::complex<double>> q{1.0};
  if (N > 1) {
    std::vector<double> a(N);
    double c = 1;
    for (int k = 0; k < N; ++k) {
      a[k] = c;  // C(N-1+k, k)
      c = c * (N + k) / (k + 1);
    }
    Matrix comp = Matrix::Zero(N - 1, N - 1);
    for (int i = 1; i < N - 1; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < N - 1; ++i) comp(i, N - 2) = -a[i] / a[N - 1];
    Eigen::EigenSolver<Matrix> es(comp, false);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::numeric, "daubechies: root finding failed");
    for (int i = 0; i < N - 1; ++i) {
      std::complex<double> y = es.eigenvalues()(i);
      std::complex<double> b = 1.0 - 2.0 * y;
      std::complex<double> s = std::sqrt(b * b - 1.0);
      std::complex<double> z = std::abs(b + s) < 1.0 ? b + s : b - s;
      std::vector<std::complex<double>> nq(q.size() + 1, 0.0);
      for (std::size_t k = 0; k < q.size(); ++k) {
        nq[k + 1] += q[k];
        nq[k] -= z * q[k];
      }
      q = nq;
    }
  }
  for (int i = 0; i < N; ++i) {
    std::vector<std::complex<double>> nq(q.size() + 1, 0.0);
    for (std::size_t k = 0; k < q.size(); ++k) nq[k] += q[k], nq[k + 1] += q[k];
    q = nq;
  }
  WaveletFilter f;
  f.order = order;
  double sum = 0;
  for (auto& v : q) sum += v.real();
  for (auto& v : q) f.lo.push_back(v.real() * std::sqrt(2.0) / sum);
  f.hi = quadrature_mirror(f.lo);
  if (orthonormality_residual(f) > 1e-10)
    throw Error(ErrorKind::numeric, "daubechies: filter is not orthonormal");
  return f;
}

// ------------------------------------------------------------- index sets

struct DiagonalAnisotropy {
  std::vector<double> lambda;

  DiagonalAnisotropy() = default;
  explicit DiagonalAnisotropy(std::vector<double> l) : lambda(std::move(l)) {
    if (lambda.empty()) throw Error(ErrorKind::domain, "anisotropy needs at least one axis");
    double s = 0;
    for (double v : lambda) {
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::domain, "anisotropy exponents must be positive");
      s += v;
    }
    if (std::abs(s - static_cast<double>(lambda.size())) > 1e-10) {
      std::ostringstream os;
      os << "anisotropy exponents must sum to " << lambda.size() << " (got " << s << ")";
      throw Error(ErrorKind::domain, os.str());
    }
  }
  // Exponents without the trace constraint, for rescaled analyses.
  static DiagonalAnisotropy unnormalized(std::vector<double> l) {
    for (double v : l)
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::domain, "anisotropy exponents must be positive");
    DiagonalAnisotropy D;
    D.lambda = std::move(l);
    return D;
  }
  int dim() const { return static_cast<int>(lambda.size()); }
  bool operator==(const DiagonalAnisotropy& o) const { return lambda == o.lambda; }
};

inline int level_floor(double x) { return static_cast<int>(std::floor(x + 1e-9)); }

struct IndexPair {
  std::string G;  // one of 'F' / 'M' per axis
  std::vector<int> gamma;

  bool operator<(const IndexPair& o) const { return G != o.G ? G < o.G : gamma < o.gamma; }
  bool operator==(const IndexPair& o) const { return G == o.G && gamma == o.gamma; }
  int trace() const {
    int t = 0;
    for (int g : gamma) t += g;
    return t;
  }
};

namespace detail {

// Per-axis level bounds at scale j, optionally clamped to the grid levels.
inline std::vector<IndexPair> index_set(const DiagonalAnisotropy& D, int j, const std::vector<int>* levels) {
  const int d = D.dim();
  if (j < 0) throw Error(ErrorKind::domain, "scale must be non-negative");
  if (j == 0) return {IndexPair{std::string(d, 'F'), std::vector<int>(d, 0)}};
  std::vector<int> lo(d), hi(d);
  for (int r = 0; r < d; ++r) {
    lo[r] = level_floor((j - 1) * D.lambda[r]);
    hi[r] = level_floor(j * D.lambda[r]);
    if (levels) lo[r] = std::min(lo[r], (*levels)[r]), hi[r] = std::min(hi[r], (*levels)[r]);
  }
  std::vector<IndexPair> out;
  for (int mask = 1; mask < (1 << d); ++mask) {
    std::string G(d, 'F');
    for (int r = 0; r < d; ++r)
      if ((mask >> (d - 1 - r)) & 1) G[r] = 'M';
    // Cartesian product of admissible levels per axis.
    std::vector<int> g(d);
    bool empty = false;
    for (int r = 0; r < d; ++r) {
      g[r] = lo[r];
      if (G[r] == 'M' && lo[r] >= hi[r]) empty = true;
    }
    if (empty) continue;
    while (true) {
      out.push_back(IndexPair{G, g});
      int r = d - 1;
      for (; r >= 0; --r) {
        if (G[r] == 'F') continue;
        if (++g[r] < hi[r]) break;
        g[r] = lo[r];
      }
      if (r < 0) break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline std::vector<IndexPair> build_index_set(const DiagonalAnisotropy& D, int j) {
  return detail::index_set(D, j, nullptr);
}

// The index set at scale j with per-axis levels clamped to the grid depth.
inline std::vector<IndexPair> grid_index_set(const DiagonalAnisotropy& D, int j, const std::vector<int>& levels) {
  return detail::index_set(D, j, &levels);
}

// True when no axis level at scale j exceeds the grid depth.
inline bool scale_unclamped(const DiagonalAnisotropy& D, int j, const std::vector<int>& levels) {
  for (int r = 0; r < D.dim(); ++r)
    if (level_floor(j * D.lambda[r]) > levels[r]) return false;
  return true;
}

// Smallest scale whose index sets exhaust the grid.
inline int complete_scale(const DiagonalAnisotropy& D, const std::vector<int>& levels) {
  for (int j = 0;; ++j) {
    bool done = true;
    for (int r = 0; r < D.dim(); ++r) done = done && level_floor(j * D.lambda[r]) >= levels[r];
    if (done) return j;
  }
}

// Largest scale that is not clamped by the grid depth.
inline int max_unclamped_scale(const DiagonalAnisotropy& D, const std::vector<int>& levels) {
  int j = 0;
  while (scale_unclamped(D, j + 1, levels)) ++j;
  return j;
}

struct WaveletIndex {
  int j = 0;
  std::string G;
  std::vector<int> gamma;
  std::vector<std::size_t> k;
};

inline bool satisfies_index_rules(const DiagonalAnisotropy& D, const WaveletIndex& w) {
  const int d = D.dim();
  if (static_cast<int>(w.G.size()) != d || static_cast<int>(w.gamma.size()) != d) return false;
  if (w.j == 0) return w.G == std::string(d, 'F') && w.gamma == std::vector<int>(d, 0);
  if (w.G == std::string(d, 'F')) return false;
  for (int r = 0; r < d; ++r) {
    int lo = level_floor((w.j - 1) * D.lambda[r]), hi = level_floor(w.j * D.lambda[r]);
    if (w.G[r] == 'F' && w.gamma[r] != lo) return false;
    if (w.G[r] == 'M' && !(lo <= w.gamma[r] && w.gamma[r] < hi)) return false;
    if (w.G[r] != 'F' && w.G[r] != 'M') return false;
  }
  return true;
}

// #{k in Z^d : sum_l |k_l|^{1/lambda_l} < j 2^j}.
inline long double gamma_window_count(const DiagonalAnisotropy& D, int j) {
  const double R = j * std::ldexp(1.0, j);
  const int d = D.dim();
  std::function<long double(int, double)> count = [&](int r, double budget) -> long double {
    if (budget <= 0) return 0;
    // |k_r| ranges over integers with |k_r|^{1/l} < budget.
    double kmax_real = std::pow(budget, D.lambda[r]);
    long kmax = static_cast<long>(std::ceil(kmax_real)) - 1;
    if (kmax < 0) return 0;
    if (r == d - 1) return 2.0L * kmax + 1.0L;
    long double total = count(r + 1, budget);
    for (long k = 1; k <= kmax; ++k) total += 2.0L * count(r + 1, budget - std::pow(static_cast<double>(k), 1.0 / D.lambda[r]));
    return total;
  };
  return count(0, R);
}

// ------------------------------------------------------------- transforms

namespace detail {

// Splits axis `axis` of `in` (length m) into scaling / wavelet halves with
// periodic wrap.
inline void analysis_step(const NdArray& in, int axis, const WaveletFilter& f, NdArray& lo, NdArray& hi) {
  const std::size_t m = in.shape[axis];
  std::size_t outer = 1, inner = 1;
  for (int r = 0; r < axis; ++r) outer *= in.shape[r];
  for (std::size_t r = axis + 1; r < in.rank(); ++r) inner *= in.shape[r];
  auto shape = in.shape;
  shape[axis] = m / 2;
  lo = NdArray(shape);
  hi = NdArray(shape);
  const std::size_t L = f.lo.size();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = in.data.data() + o * m * inner;
    double* dl = lo.data.data() + o * (m / 2) * inner;
    double* dh = hi.data.data() + o * (m / 2) * inner;
    for (std::size_t k = 0; k < m / 2; ++k) {
      double* pl = dl + k * inner;
      double* ph = dh + k * inner;
      for (std::size_t l = 0; l < L; ++l) {
        const double* s = src + ((2 * k + l) % m) * inner;
        const double a = f.lo[l], b = f.hi[l];
        for (std::size_t i = 0; i < inner; ++i) {
          pl[i] += a * s[i];
          ph[i] += b * s[i];
        }
      }
    }
  }
}

// Adjoint of analysis_step: out (length 2m along axis) from lo/hi halves.
// Either input may be null (treated as zero).
inline NdArray synthesis_step(const NdArray* lo, const NdArray* hi, int axis, const WaveletFilter& f) {
  const NdArray& ref = lo ? *lo : *hi;
  const std::size_t h = ref.shape[axis], m = 2 * h;
  std::size_t outer = 1, inner = 1;
  for (int r = 0; r < axis; ++r) outer *= ref.shape[r];
  for (std::size_t r = axis + 1; r < ref.rank(); ++r) inner *= ref.shape[r];
  auto shape = ref.shape;
  shape[axis] = m;
  NdArray out(shape);
  const std::size_t L = f.lo.size();
  for (std::size_t o = 0; o < outer; ++o) {
    double* dst = out.data.data() + o * m * inner;
    for (std::size_t k = 0; k < h; ++k) {
      const double* pl = lo ? lo->data.data() + (o * h + k) * inner : nullptr;
      const double* ph = hi ? hi->data.data() + (o * h + k) * inner : nullptr;
      for (std::size_t l = 0; l < L; ++l) {
        double* t = dst + ((2 * k + l) % m) * inner;
        if (pl)
          for (std::size_t i = 0; i < inner; ++i) t[i] += f.lo[l] * pl[i];
        if (ph)
          for (std::size_t i = 0; i < inner; ++i) t[i] += f.hi[l] * ph[i];
      }
    }
  }
  return out;
}

inline int exact_log2(std::size_t n) {
  int J = 0;
  while ((std::size_t{1} << J) < n) ++J;
  return (std::size_t{1} << J) == n ? J : -1;
}

}  // namespace detail

inline std::vector<int> grid_levels(const std::vector<std::size_t>& shape, const WaveletFilter& f) {
  std::vector<int> J;
  for (std::size_t n : shape) {
    int l = detail::exact_log2(n);
    if (l < 0) throw Error(ErrorKind::configuration, "grid size per axis must be a power of two");
    if (n < f.lo.size()) throw Error(ErrorKind::configuration, "filter support exceeds the grid");
    J.push_back(l);
  }
  return J;
}

// Lazily evaluated separable cascades of one sampled field. Per-axis
// cascades are cached by axis prefix, so branches sharing leading axes and
// different anisotropies analysing the same field reuse work.
class SeparablePyramid {
 public:
  SeparablePyramid(const NdArray& samples, const std::vector<double>& spacing, WaveletFilter filter)
      : filter_(std::move(filter)) {
    levels_ = grid_levels(samples.shape, filter_);
    if (spacing.size() != samples.rank()) throw Error(ErrorKind::domain, "spacing dimension differs from grid");
    auto base = std::make_shared<NdArray>(samples);
    double s = 1;
    for (double h : spacing) s *= std::sqrt(h);
    for (double& v : base->data) v *= s;
    cache_[""] = base;
  }

  const std::vector<int>& levels() const { return levels_; }
  const WaveletFilter& filter() const { return filter_; }
  int dim() const { return static_cast<int>(levels_.size()); }

  // Orthonormal coefficients of the tensor branch (G, gamma).
  std::shared_ptr<const NdArray> branch(const std::string& G, const std::vector<int>& gamma) {
    std::string key;
    for (int r = 0; r < dim(); ++r) {
      std::string next = key + G[r] + std::to_string(gamma[r]) + "|";
      if (!cache_.count(next)) cascade(key, r);
      key = next;
    }
    return cache_.at(key);
  }

 private:
  void cascade(const std::string& parent, int axis) {
    std::shared_ptr<const NdArray> cur = cache_.at(parent);
    const int J = levels_[axis];
    cache_[parent + "F" + std::to_string(J) + "|"] = cur;
    for (int l = J - 1; l >= 0; --l) {
      auto lo = std::make_shared<NdArray>(), hi = std::make_shared<NdArray>();
      detail::analysis_step(*cur, axis, filter_, *lo, *hi);
      cache_[parent + "M" + std::to_string(l) + "|"] = hi;
      cache_[parent + "F" + std::to_string(l) + "|"] = lo;
      cur = lo;
    }
  }

  WaveletFilter filter_;
  std::vector<int> levels_;
  std::map<std::string, std::shared_ptr<const NdArray>> cache_;
};

struct CoefficientBranch {
  int j = 0;
  IndexPair index;
  NdArray values;  // stored value <f, 2^{Tr} Psi> for every spatial index k
};

struct WaveletCoefficientSet {
  DiagonalAnisotropy anisotropy;
  int filter_order = 0;
  std::vector<int> levels;        // grid depth per axis
  std::vector<double> spacing;
  std::vector<CoefficientBranch> branches;  // sorted by (j, G, gamma)

  int j_min() const { return branches.empty() ? 0 : branches.front().j; }
  int j_max() const { return branches.empty() ? -1 : branches.back().j; }
  std::vector<std::size_t> grid_shape() const {
    std::vector<std::size_t> s;
    for (int l : levels) s.push_back(std::size_t{1} << l);
    return s;
  }

  const CoefficientBranch* find(int j, const IndexPair& p) const {
    for (const auto& b : branches)
      if (b.j == j && b.index == p) return &b;
    return nullptr;
  }

  std::optional<double> coefficient(const WaveletIndex& w) const {
    const auto* b = find(w.j, IndexPair{w.G, w.gamma});
    if (!b || w.k.size() != b->values.rank()) return std::nullopt;
    for (std::size_t r = 0; r < w.k.size(); ++r)
      if (w.k[r] >= b->values.shape[r]) return std::nullopt;
    return b->values[b->values.flat(w.k)];
  }

  // True if the periodized support of coefficient k crosses the grid edge on
  // some axis: after t analysis steps it covers samples
  // 2^t k + [0, (2^t - 1)(L - 1)].
  bool wraps(const CoefficientBranch& b, const std::vector<std::size_t>& k) const {
    const std::size_t L = 2 * static_cast<std::size_t>(filter_order);
    for (std::size_t r = 0; r < k.size(); ++r) {
      const std::size_t n = std::size_t{1} << levels[r];
      const std::size_t step = n / b.values.shape[r];
      if (step * k[r] + (step - 1) * (L - 1) >= n) return true;
    }
    return false;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& b : branches) n += b.values.size();
    return n;
  }
};

inline std::vector<std::size_t> branch_shape(const IndexPair& p) {
  std::vector<std::size_t> s;
  for (int g : p.gamma) s.push_back(std::size_t{1} << g);
  return s;
}

// Coefficient set with the layout of the transform but all values zero.
inline WaveletCoefficientSet empty_coefficient_set(const DiagonalAnisotropy& D, const std::vector<int>& levels,
                                                   int j_max, int filter_order,
                                                   std::vector<double> spacing = {}) {
  WaveletCoefficientSet set;
  set.anisotropy = D;
  set.filter_order = filter_order;
  set.levels = levels;
  set.spacing = spacing.empty() ? std::vector<double>(levels.size(), 1.0) : spacing;
  for (int j = 0; j <= j_max; ++j)
    for (const auto& p : grid_index_set(D, j, levels)) set.branches.push_back({j, p, NdArray(branch_shape(p))});
  return set;
}

inline WaveletCoefficientSet anisotropic_wavelet_transform(SeparablePyramid& pyr, const DiagonalAnisotropy& D,
                                                           int j_max, const std::vector<double>& spacing) {
  if (D.dim() != pyr.dim()) throw Error(ErrorKind::domain, "anisotropy dimension differs from the grid");
  if (j_max < 0) throw Error(ErrorKind::domain, "j_max must be non-negative");
  WaveletCoefficientSet set;
  set.anisotropy = D;
  set.filter_order = pyr.filter().order;
  set.levels = pyr.levels();
  set.spacing = spacing;
  for (int j = 0; j <= j_max; ++j) {
    for (const auto& p : grid_index_set(D, j, set.levels)) {
      auto src = pyr.branch(p.G, p.gamma);
      CoefficientBranch b{j, p, *src};
      const double scale = std::sqrt(std::ldexp(1.0, p.trace()));
      for (double& v : b.values.data) v *= scale;
      set.branches.push_back(std::move(b));
    }
  }
  return set;
}

inline WaveletCoefficientSet anisotropic_wavelet_transform(const NdArray& samples, const std::vector<double>& spacing,
                                                           const DiagonalAnisotropy& D, int j_max,
                                                           int filter_order = 4) {
  if (filter_order < 1) throw Error(ErrorKind::configuration, "filter order must be at least 1");
  SeparablePyramid pyr(samples, spacing, daubechies(filter_order));
  return anisotropic_wavelet_transform(pyr, D, j_max, spacing);
}

inline WaveletCoefficientSet anisotropic_wavelet_transform(const FieldRealization& field, const DiagonalAnisotropy& D,
                                                           int j_max, int filter_order = 4) {
  return anisotropic_wavelet_transform(field.values, field.spec.grid.spacing, D, j_max, filter_order);
}

// Inverse transform; the set must cover the grid completely.
inline NdArray reconstruct(const WaveletCoefficientSet& set) {
  const int d = set.anisotropy.dim();
  const int jc = complete_scale(set.anisotropy, set.levels);
  if (set.j_max() < jc) throw Error(ErrorKind::domain, "coefficient set does not cover the grid");
  for (int j = 0; j <= jc; ++j)
    for (const auto& p : grid_index_set(set.anisotropy, j, set.levels))
      if (!set.find(j, p)) throw Error(ErrorKind::domain, "coefficient set is missing a branch");
  const WaveletFilter f = daubechies(set.filter_order);
  NdArray out(set.grid_shape());
  for (const auto& b : set.branches) {
    if (b.j > jc) continue;
    NdArray cur = b.values;
    const double scale = 1.0 / std::sqrt(std::ldexp(1.0, b.index.trace()));
    bool zero = true;
    for (double& v : cur.data) {
      v *= scale;
      zero = zero && v == 0.0;
    }
    if (zero) continue;
    for (int r = 0; r < d; ++r) {
      int level = b.index.gamma[r];
      if (b.index.G[r] == 'M') {
        cur = detail::synthesis_step(nullptr, &cur, r, f);
        ++level;
      }
      for (; level < set.levels[r]; ++level) cur = detail::synthesis_step(&cur, nullptr, r, f);
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += cur[i];
  }
  double s = 1;
  for (double h : set.spacing) s *= std::sqrt(h);
  for (double& v : out.data) v /= s;
  return out;
}

}  // namespace osgrf
