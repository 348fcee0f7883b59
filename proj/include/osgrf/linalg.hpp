#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "osgrf/core.hpp"

namespace osgrf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using cplx = std::complex<double>;

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline void require_square_finite(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw Error(ErrorKind::domain, std::string(what) + ": matrix must be square and non-empty");
  if (!m.allFinite()) throw Error(ErrorKind::domain, std::string(what) + ": non-finite entries");
}

// exp(A) by scaling and squaring with a degree-18 Taylor polynomial.
inline Matrix matrix_exp(const Matrix& A) {
  require_square_finite(A, "matrix_exp");
  const Eigen::Index d = A.rows();
  double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > 0.25) s = static_cast<int>(std::ceil(std::log2(norm1 / 0.25)));
  Matrix B = A * std::ldexp(1.0, -s);
  Matrix I = Matrix::Identity(d, d);
  Matrix T = I;
  for (int k = 18; k >= 1; --k) T = I + (B * T) / static_cast<double>(k);
  for (int i = 0; i < s; ++i) T = T * T;
  return T;
}

// a^M = exp(M log a).
inline Matrix matrix_power(const Matrix& M, double a) {
  if (!(a > 0.0) || !std::isfinite(a))
    throw Error(ErrorKind::domain, "matrix_power: base must be positive and finite");
  require_square_finite(M, "matrix_power");
  if (a == 1.0) return Matrix::Identity(M.rows(), M.cols());
  return matrix_exp(M * std::log(a));
}

inline std::vector<cplx> eigenvalues(const Matrix& M) {
  require_square_finite(M, "eigenvalues");
  Eigen::ComplexEigenSolver<CMatrix> es(M.cast<cplx>(), false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::numeric, "eigensolver did not converge");
  std::vector<cplx> out(es.eigenvalues().data(), es.eigenvalues().data() + M.rows());
  return out;
}

inline std::pair<double, double> spectral_bounds(const Matrix& M) {
  auto ev = eigenvalues(M);
  double lo = std::abs(ev[0].real()), hi = lo;
  for (auto& z : ev) {
    lo = std::min(lo, std::abs(z.real()));
    hi = std::max(hi, std::abs(z.real()));
  }
  return {lo, hi};
}

struct JordanParts {
  Matrix D;  // real diagonalizable, real spectrum
  Matrix S;  // semisimple, imaginary spectrum
  Matrix N;  // nilpotent
};

namespace detail {

inline std::vector<cplx> cluster_centers(const std::vector<cplx>& ev, double tol) {
  std::vector<int> label(ev.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (label[i] < 0) label[i] = next++;
    for (std::size_t k = 0; k < ev.size(); ++k) {
      if (k == i || std::abs(ev[i] - ev[k]) >= tol) continue;
      if (label[k] < 0) {
        label[k] = label[i];
      } else if (label[k] != label[i]) {
        int from = label[k], to = label[i];
        for (auto& l : label)
          if (l == from) l = to;
      }
    }
  }
  std::vector<cplx> centers;
  std::vector<int> seen;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (std::find(seen.begin(), seen.end(), label[i]) != seen.end()) continue;
    seen.push_back(label[i]);
    cplx sum = 0;
    int cnt = 0;
    for (std::size_t k = 0; k < ev.size(); ++k)
      if (label[k] == label[i]) sum += ev[k], ++cnt;
    centers.push_back(sum / static_cast<double>(cnt));
  }
  // Real matrix: centres come in conjugate pairs; make the pairing exact.
  for (auto& c : centers)
    if (std::abs(c.imag()) < tol) c = cplx(c.real(), 0.0);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (centers[i].imag() <= 0.0) continue;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (k != i && std::abs(centers[k] - std::conj(centers[i])) < 10 * tol) {
        centers[k] = std::conj(centers[i]);
        break;
      }
    }
  }
  return centers;
}

inline CMatrix poly_at(const CMatrix& X, const std::vector<cplx>& roots, std::size_t skip) {
  const Eigen::Index d = X.rows();
  CMatrix I = CMatrix::Identity(d, d);
  CMatrix P = I;
  for (std::size_t i = 0; i < roots.size(); ++i)
    if (i != skip) P = P * (X - roots[i] * I);
  return P;
}

inline JordanParts parts_from_centers(const Matrix& M, const std::vector<cplx>& mu) {
  const Eigen::Index d = M.rows();
  const double scale = std::max(1.0, max_abs(M));
  const std::size_t none = mu.size();
  // Newton iteration for the semisimple part: Ms <- Ms - P(Ms) P'(Ms)^{-1}.
  CMatrix Ms = M.cast<cplx>();
  for (int it = 0; it < 100; ++it) {
    CMatrix P = poly_at(Ms, mu, none);
    if (P.cwiseAbs().maxCoeff() <= 1e-15 * std::pow(scale, static_cast<double>(mu.size()))) break;
    CMatrix dP = CMatrix::Zero(d, d);
    for (std::size_t i = 0; i < mu.size(); ++i) dP += poly_at(Ms, mu, i);
    Eigen::PartialPivLU<CMatrix> lu(dP);
    CMatrix step = lu.solve(P);
    if (!step.allFinite()) throw Error(ErrorKind::numeric, "jordan: singular Newton step");
    Ms -= step;
    if (step.cwiseAbs().maxCoeff() <= 1e-16 * scale) break;
  }
  CMatrix Dc = CMatrix::Zero(d, d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    cplx denom = 1.0;
    for (std::size_t k = 0; k < mu.size(); ++k)
      if (k != i) denom *= (mu[i] - mu[k]);
    Dc += (mu[i].real() / denom) * poly_at(Ms, mu, i);
  }
  JordanParts p;
  Matrix msr = Ms.real();
  p.D = Dc.real();
  p.S = msr - p.D;
  p.N = M - msr;
  return p;
}

}  // namespace detail

struct JordanResidual {
  double recomposition = 0, commutator = 0, nilpotency = 0, d_imag = 0, s_real = 0;
};

inline JordanResidual jordan_residual(const Matrix& M, const JordanParts& p) {
  JordanResidual r;
  r.recomposition = max_abs(p.D + p.S + p.N - M);
  r.commutator = std::max({max_abs(p.D * p.S - p.S * p.D), max_abs(p.D * p.N - p.N * p.D),
                           max_abs(p.S * p.N - p.N * p.S)});
  Matrix Nd = Matrix::Identity(M.rows(), M.cols());
  for (Eigen::Index i = 0; i < M.rows(); ++i) Nd = Nd * p.N;
  r.nilpotency = max_abs(Nd);
  for (auto& z : eigenvalues(p.D)) r.d_imag = std::max(r.d_imag, std::abs(z.imag()));
  for (auto& z : eigenvalues(p.S)) r.s_real = std::max(r.s_real, std::abs(z.real()));
  return r;
}

inline bool jordan_ok(const JordanResidual& r, double scale) {
  return r.recomposition <= 1e-12 * scale && r.commutator <= 1e-10 && r.nilpotency <= 1e-10 &&
         r.d_imag <= 1e-8 && r.s_real <= 1e-8;
}

// M = D + S + N with commuting real parts. Eigenvalues are grouped with
// tolerance 1e-8 (relative to the matrix scale); near-defective inputs whose
// computed eigenvalues split further are retried with a looser grouping.
inline JordanParts jordan_additive_decompose(const Matrix& M) {
  require_square_finite(M, "jordan_additive_decompose");
  auto ev = eigenvalues(M);
  const double scale = std::max(1.0, max_abs(M));
  JordanResidual last;
  for (double tol : {1e-8, 1e-6, 1e-4}) {
    auto mu = detail::cluster_centers(ev, tol * scale);
    JordanParts p;
    try {
      p = detail::parts_from_centers(M, mu);
    } catch (const Error&) {
      continue;
    }
    last = jordan_residual(M, p);
    if (jordan_ok(last, scale)) return p;
  }
  std::ostringstream os;
  os << "jordan decomposition failed: recomposition " << last.recomposition << ", commutator "
     << last.commutator << ", nilpotency " << last.nilpotency << ", D imaginary " << last.d_imag
     << ", S real " << last.s_real;
  throw Error(ErrorKind::numeric, os.str());
}

// A d x d real matrix with spectrum in the open right half plane.
class AnisotropyMatrix {
 public:
  AnisotropyMatrix() : AnisotropyMatrix(Matrix::Identity(2, 2)) {}
  explicit AnisotropyMatrix(const Matrix& m) : m_(m) {
    if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite())
      throw Error(ErrorKind::invalid_anisotropy, "matrix must be square, non-empty and finite");
    for (auto& z : eigenvalues(m)) {
      if (z.real() <= 1e-8) {
        std::ostringstream os;
        os << "eigenvalue " << z.real() << (z.imag() < 0 ? "" : "+") << z.imag()
           << "i has non-positive real part";
        throw Error(ErrorKind::invalid_anisotropy, os.str());
      }
    }
    auto b = spectral_bounds(m);
    rho_min_ = b.first;
    rho_max_ = b.second;
    parts_ = jordan_additive_decompose(m);
  }

  const Matrix& entries() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  double trace() const { return m_.trace(); }
  double rho_min() const { return rho_min_; }
  double rho_max() const { return rho_max_; }
  const JordanParts& jordan() const { return parts_; }
  bool is_diagonal(double tol = 0.0) const {
    Matrix off = m_;
    off.diagonal().setZero();
    return max_abs(off) <= tol;
  }
  Matrix power(double a) const { return matrix_power(m_, a); }
  AnisotropyMatrix transposed() const { return AnisotropyMatrix(Matrix(m_.transpose())); }

 private:
  Matrix m_;
  double rho_min_ = 1, rho_max_ = 1;
  JordanParts parts_;
};

inline AnisotropyMatrix normalize_trace(const Matrix& M) {
  require_square_finite(M, "normalize_trace");
  double tr = M.trace();
  if (!(tr > 0.0)) throw Error(ErrorKind::invalid_anisotropy, "trace must be positive");
  return AnisotropyMatrix(M * (static_cast<double>(M.rows()) / tr));
}

inline Matrix diag_matrix(const std::vector<double>& v) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(i, i) = v[i];
  return m;
}

inline Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  const auto d = static_cast<Eigen::Index>(rows.size());
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d)
      throw Error(ErrorKind::domain, "matrix rows must form a square array");
    for (Eigen::Index k = 0; k < d; ++k) m(i, k) = rows[i][k];
  }
  return m;
}

inline std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) rows[i][k] = m(i, k);
  return rows;
}

}  // namespace osgrf
