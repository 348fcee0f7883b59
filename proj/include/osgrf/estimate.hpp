#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "osgrf/besov.hpp"

namespace osgrf {

struct Candidate {
  double param = 0;             // lambda for the diag(lambda, 2 - lambda) grid
  DiagonalAnisotropy anisotropy;
  bool outside_hypothesis = false;  // candidate was not diagonal
  std::string label;
};

struct CandidateFamily {
  std::vector<Candidate> members;
  std::string description;
};

inline double snap(double x) { return std::round(x * 1e12) / 1e12; }

inline CandidateFamily candidate_grid(int d, double lo, double hi, double step) {
  if (d != 2) throw Error(ErrorKind::domain, "candidate grid is defined for d = 2");
  if (!(lo > 0) || !(hi >= lo) || !(step > 0)) throw Error(ErrorKind::domain, "need 0 < lo <= hi and step > 0");
  CandidateFamily fam;
  std::ostringstream desc;
  desc << "diag(lambda, 2 - lambda), lambda in [" << lo << ", " << hi << "] step " << step;
  fam.description = desc.str();
  const long count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) {
    const double l = snap(lo + i * step);
    if (!(2.0 - l > 0)) throw Error(ErrorKind::domain, "2 - lambda must be positive");
    std::ostringstream lab;
    lab << "diag(" << l << "," << snap(2.0 - l) << ")";
    fam.members.push_back({l, DiagonalAnisotropy({l, 2.0 - l}), false, lab.str()});
  }
  return fam;
}

// Family from arbitrary matrices. Non-diagonal members are analysed through
// their trace-normalized diagonal and flagged.
inline CandidateFamily family_from_matrices(const std::vector<Matrix>& mats, std::string description = "") {
  CandidateFamily fam;
  fam.description = std::move(description);
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const Matrix& M = mats[i];
    require_square_finite(M, "candidate");
    const int d = static_cast<int>(M.rows());
    std::vector<double> l(d);
    double tr = M.trace();
    bool diagonal = true;
    for (int r = 0; r < d; ++r) {
      if (!(M(r, r) > 0)) throw Error(ErrorKind::domain, "candidate diagonal entries must be positive");
      l[r] = M(r, r) * d / tr;
      for (int c = 0; c < d; ++c)
        if (r != c && M(r, c) != 0.0) diagonal = false;
    }
    std::ostringstream lab;
    lab << "diag(";
    for (int r = 0; r < d; ++r) lab << (r ? "," : "") << snap(l[r]);
    lab << ")";
    Candidate c{snap(l[0]), DiagonalAnisotropy(l), !diagonal, lab.str()};
    for (const auto& o : fam.members)
      if (o.anisotropy == c.anisotropy) throw Error(ErrorKind::domain, "candidate family members must be distinct");
    fam.members.push_back(c);
  }
  return fam;
}

// H0 * min_r lambda_r / lambda0_r for diagonal E0 and candidate D.
inline double predicted_alpha(const std::vector<double>& e0_diag, double H0, const DiagonalAnisotropy& D) {
  double m = infinity;
  for (int r = 0; r < D.dim(); ++r) m = std::min(m, D.lambda[r] / e0_diag[r]);
  return H0 * m;
}

struct SearchOptions {
  double p = 2, q = 2;
  int filter_order = 4;
  EstimateOptions estimate;
  unsigned threads = 1;
};

struct CandidateResult {
  Candidate candidate;
  std::vector<ExponentEstimate> estimates;  // one per realization
  double alpha_mean = 0;
  double alpha_stderr = 0;  // sd over realizations / sqrt(R); regression stderr if R = 1
  int votes = 0;            // realizations whose own argmax is this candidate
};

struct SearchResult {
  std::vector<CandidateResult> per_candidate;
  std::size_t argmax = 0;
  DiagonalAnisotropy argmax_anisotropy;
  double H_hat = 0;
  std::size_t vote_argmax = 0;
  std::vector<std::pair<double, double>> curve;  // (param, alpha mean)
};

namespace detail {

inline double distance_to_isotropy(const DiagonalAnisotropy& D) {
  double s = 0;
  for (double l : D.lambda) s += (l - 1) * (l - 1);
  return std::sqrt(s);
}

// Index of the maximum; ties go to the candidate nearer isotropy, then the
// smaller first exponent.
inline std::size_t argmax_with_ties(const std::vector<double>& v, const std::vector<Candidate>& c) {
  std::size_t best = 0;
  while (best + 1 < v.size() && std::isnan(v[best])) ++best;
  for (std::size_t i = best + 1; i < v.size(); ++i) {
    if (std::isnan(v[i])) continue;
    if (v[i] > v[best]) {
      best = i;
    } else if (v[i] == v[best]) {
      double di = distance_to_isotropy(c[i].anisotropy), db = distance_to_isotropy(c[best].anisotropy);
      if (di < db || (di == db && c[i].anisotropy.lambda[0] < c[best].anisotropy.lambda[0])) best = i;
    }
  }
  return best;
}

inline std::vector<int> levels_of(const NdArray& a) {
  std::vector<int> J;
  for (std::size_t n : a.shape) {
    int l = exact_log2(n);
    if (l < 0) throw Error(ErrorKind::configuration, "grid size per axis must be a power of two");
    J.push_back(l);
  }
  return J;
}

}  // namespace detail

// Exponent estimates of one sampled field for every candidate, sharing one
// pyramid. Candidates with too few usable scales get alpha_hat = NaN.
inline std::vector<ExponentEstimate> analyze_candidates(const NdArray& values, const std::vector<double>& spacing,
                                                        const CandidateFamily& fam, const SearchOptions& opt) {
  SeparablePyramid pyr(values, spacing, daubechies(opt.filter_order));
  std::vector<ExponentEstimate> out;
  for (const auto& c : fam.members) {
    const int jmax = opt.estimate.j_range
                         ? std::min(opt.estimate.j_range->second, complete_scale(c.anisotropy, pyr.levels()))
                         : max_unclamped_scale(c.anisotropy, pyr.levels());
    auto set = anisotropic_wavelet_transform(pyr, c.anisotropy, jmax, spacing);
    try {
      out.push_back(critical_exponent_estimate(set, opt.p, opt.q, opt.estimate));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_data) throw;
      ExponentEstimate none;
      none.anisotropy = c.anisotropy;
      none.p = opt.p;
      none.q = opt.q;
      none.alpha_hat = none.slope_stderr = std::numeric_limits<double>::quiet_NaN();
      out.push_back(none);
    }
  }
  return out;
}

inline SearchResult anisotropy_search(const std::vector<FieldRealization>& fields, const CandidateFamily& fam,
                                      const SearchOptions& opt = {}) {
  if (fields.empty()) throw Error(ErrorKind::insufficient_data, "anisotropy search needs at least one realization");
  if (fam.members.empty()) throw Error(ErrorKind::domain, "candidate family is empty");
  for (const auto& c : fam.members)
    if (c.anisotropy.dim() != static_cast<int>(fields[0].values.rank()))
      throw Error(ErrorKind::domain, "candidate dimension differs from the field");
  std::vector<std::vector<ExponentEstimate>> per_field(fields.size());
  parallel_for(fields.size(), opt.threads, [&](std::size_t i) {
    per_field[i] = analyze_candidates(fields[i].values, fields[i].spec.grid.spacing, fam, opt);
  });
  SearchResult res;
  const std::size_t R = fields.size(), C = fam.members.size();
  std::vector<double> means(C);
  for (std::size_t c = 0; c < C; ++c) {
    CandidateResult cr;
    cr.candidate = fam.members[c];
    std::vector<double> a;
    for (std::size_t r = 0; r < R; ++r) {
      cr.estimates.push_back(per_field[r][c]);
      a.push_back(per_field[r][c].alpha_hat);
    }
    double m = 0;
    for (double v : a) m += v;
    m /= R;
    cr.alpha_mean = m;
    if (R > 1) {
      double s = 0;
      for (double v : a) s += (v - m) * (v - m);
      cr.alpha_stderr = std::sqrt(s / (R - 1) / R);
    } else {
      cr.alpha_stderr = a.empty() ? 0 : per_field[0][c].slope_stderr;
    }
    means[c] = m;
    res.per_candidate.push_back(std::move(cr));
  }
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<double> v(C);
    for (std::size_t c = 0; c < C; ++c) v[c] = per_field[r][c].alpha_hat;
    ++res.per_candidate[detail::argmax_with_ties(v, fam.members)].votes;
  }
  if (std::all_of(means.begin(), means.end(), [](double m) { return std::isnan(m); }))
    throw Error(ErrorKind::insufficient_data, "no candidate has 4 usable scales on this grid");
  res.argmax = detail::argmax_with_ties(means, fam.members);
  res.argmax_anisotropy = fam.members[res.argmax].anisotropy;
  res.H_hat = means[res.argmax];
  std::vector<double> votes;
  for (const auto& c : res.per_candidate) votes.push_back(c.votes);
  res.vote_argmax = detail::argmax_with_ties(votes, fam.members);
  for (std::size_t c = 0; c < C; ++c) res.curve.push_back({fam.members[c].param, means[c]});
  return res;
}

struct TentFit {
  double lambda0 = 0;
  double H = 0;
  double r2 = 0;
};

// Least-squares fit of alpha(l) = H min(l / l0, (2 - l) / (2 - l0)) over a
// grid of l0; H is solved in closed form for each l0.
inline TentFit fit_tent(const std::vector<std::pair<double, double>>& curve, double step = 1e-3) {
  if (curve.size() < 3) throw Error(ErrorKind::insufficient_data, "tent fit needs at least 3 points");
  double mean = 0;
  for (const auto& [l, a] : curve) mean += a;
  mean /= curve.size();
  double sst = 0;
  for (const auto& [l, a] : curve) sst += (a - mean) * (a - mean);
  TentFit best{0, 0, -infinity};
  for (double l0 = step; l0 < 2.0; l0 += step) {
    double xx = 0, xa = 0;
    for (const auto& [l, a] : curve) {
      double x = std::min(l / l0, (2 - l) / (2 - l0));
      xx += x * x;
      xa += x * a;
    }
    double H = xa / xx, sse = 0;
    for (const auto& [l, a] : curve) sse += std::pow(a - H * std::min(l / l0, (2 - l) / (2 - l0)), 2);
    double r2 = sst > 0 ? 1 - sse / sst : (sse == 0 ? 1.0 : 0.0);
    if (r2 > best.r2) best = {l0, H, r2};
  }
  return best;
}

struct CoefficientStats {
  int j = 0;
  double mean_p = 0;
  double max_norm = 0;
  std::size_t n_j = 0;                // normalized coefficients at scale j
  long double window_cells = 0;       // #Gamma_j(D0) lattice cells
};

// Coefficients normalized by the per-branch empirical RMS. With
// interior_only, coefficients whose support wraps around the grid edge are
// left out; branches with fewer than min_cells remaining are skipped.
inline std::vector<CoefficientStats> normalized_coefficient_stats(const WaveletCoefficientSet& set, double p,
                                                                  std::size_t min_cells = 100,
                                                                  bool interior_only = true) {
  if (!(p > 0)) throw Error(ErrorKind::domain, "p must be positive");
  std::map<int, CoefficientStats> by_j;
  std::map<int, double> maxabs;
  std::vector<double> kept;
  for (const auto& b : set.branches) {
    kept.clear();
    for (std::size_t i = 0; i < b.values.size(); ++i)
      if (!interior_only || !set.wraps(b, b.values.unflat(i))) kept.push_back(b.values[i]);
    if (kept.size() < min_cells) continue;
    double ms = 0;
    for (double v : kept) ms += v * v;
    ms /= kept.size();
    if (!(ms > 0)) throw Error(ErrorKind::numeric, "degenerate branch with zero variance at j = " + std::to_string(b.j));
    const double rms = std::sqrt(ms);
    auto& s = by_j[b.j];
    s.j = b.j;
    for (double v : kept) {
      double g = std::abs(v) / rms;
      s.mean_p += std::isinf(p) ? 0.0 : std::pow(g, p);
      maxabs[b.j] = std::max(maxabs[b.j], g);
    }
    s.n_j += kept.size();
  }
  if (by_j.size() < 2) throw Error(ErrorKind::insufficient_data, "need at least 2 scales with estimable variance");
  std::vector<CoefficientStats> out;
  for (auto& [j, s] : by_j) {
    s.mean_p /= static_cast<double>(s.n_j);
    s.max_norm = maxabs[j] / std::sqrt(std::log(static_cast<double>(s.n_j)));
    s.window_cells = j >= 1 ? gamma_window_count(set.anisotropy, j) : 1.0L;
    out.push_back(s);
  }
  return out;
}

}  // namespace osgrf
