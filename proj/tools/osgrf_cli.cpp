#include <CLI11.hpp>

#include <chrono>
#include <functional>
#include <iostream>
#include <random>

#include "osgrf/io.hpp"

using namespace osgrf;

namespace {

enum Exit { ok = 0, selftest_failed = 1, bad_input = 2, io_failure = 3 };

unsigned parse_parallelism(const std::string& s) {
  if (s == "auto") return 0;
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos == s.size() && v >= 1) return static_cast<unsigned>(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::bad_input, "--parallelism must be a positive integer or \"auto\"");
}

std::optional<std::pair<int, int>> parse_jrange(const std::string& s) {
  if (s.empty()) return std::nullopt;
  auto colon = s.find(':');
  try {
    if (colon != std::string::npos) {
      std::size_t a = 0, b = 0;
      int lo = std::stoi(s.substr(0, colon), &a), hi = std::stoi(s.substr(colon + 1), &b);
      if (a == colon && b == s.size() - colon - 1 && lo <= hi) return std::make_pair(lo, hi);
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::bad_input, "--jrange must be LO:HI with LO <= HI");
}

double parse_exponent(const std::string& s, const char* name) {
  if (s == "inf") return infinity;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos == s.size() && v >= 1) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::bad_input, std::string("--") + name + " must be a number >= 1 or inf");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw Error(ErrorKind::bad_input, "cannot parse \"" + s + "\" as a comma-separated list");
    }
  }
  return out;
}

// ------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string spec, out, parallelism = "1";
  std::uint64_t replicates = 1;
  std::optional<std::uint64_t> seed;
};

int simulate(const SimulateArgs& a) {
  FieldSpec spec = spec_from_json(parse_json(read_text(a.spec), a.spec));
  if (a.seed) spec.seed = *a.seed;
  const unsigned threads = parse_parallelism(a.parallelism);
  if (a.replicates < 1) throw Error(ErrorKind::bad_input, "--replicates must be at least 1");
  ensure_dir(a.out);
  SpectralSynthesizer syn(spec);
  std::vector<std::string> headers;
  std::vector<std::uint64_t> reps;
  const std::size_t chunk = std::max<std::size_t>(resolve_threads(threads), 1);
  for (std::uint64_t first = 0; first < a.replicates; first += chunk) {
    const std::size_t count = std::min<std::uint64_t>(chunk, a.replicates - first);
    for (const auto& f : syn.realize_batch(first, count, threads)) {
      headers.push_back(write_realization(a.out, f));
      reps.push_back(f.replicate);
    }
  }
  write_text(fs::path(a.out) / "manifest.json", manifest_json(spec, headers, reps).dump(2) + "\n");
  std::cout << "wrote " << headers.size() << " realization(s) to " << a.out << "\n";
  return ok;
}

// -------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string in, out, parallelism = "1", p = "2", q = "2", jrange, anisotropy, coefficients = "none";
  int filter_order = 4;
};

std::vector<FieldRealization> load_all(const std::string& dir) {
  std::vector<FieldRealization> fields;
  for (const auto& h : list_realizations(dir)) fields.push_back(read_realization(h));
  for (const auto& f : fields)
    if (f.values.shape != fields[0].values.shape)
      throw Error(ErrorKind::bad_input, "realizations in " + dir + " have different grids");
  return fields;
}

DiagonalAnisotropy default_anisotropy(const FieldSpec& s) {
  const int d = s.dim();
  if (!s.E0.is_diagonal()) return DiagonalAnisotropy(std::vector<double>(d, 1.0));
  std::vector<double> l(d);
  for (int r = 0; r < d; ++r) l[r] = s.E0.entries()(r, r);
  return DiagonalAnisotropy(l);
}

int analyze(const AnalyzeArgs& a) {
  const double p = parse_exponent(a.p, "p"), q = parse_exponent(a.q, "q");
  EstimateOptions eo;
  eo.j_range = parse_jrange(a.jrange);
  const unsigned threads = parse_parallelism(a.parallelism);
  if (a.coefficients != "none" && a.coefficients != "csv" && a.coefficients != "binary")
    throw Error(ErrorKind::bad_input, "--coefficients must be none, csv or binary");
  auto fields = load_all(a.in);
  DiagonalAnisotropy D;
  try {
    D = a.anisotropy.empty() ? default_anisotropy(fields[0].spec) : DiagonalAnisotropy(parse_list(a.anisotropy));
  } catch (const Error& e) {
    throw Error(ErrorKind::bad_input, std::string("--anisotropy: ") + e.what());
  }
  if (D.dim() != static_cast<int>(fields[0].values.rank()))
    throw Error(ErrorKind::bad_input, "--anisotropy needs one entry per axis");
  const auto levels = detail::levels_of(fields[0].values);
  const int jmax = eo.j_range ? std::min(eo.j_range->second, complete_scale(D, levels)) : max_unclamped_scale(D, levels);

  std::vector<WaveletCoefficientSet> sets(fields.size());
  std::vector<ExponentEstimate> est(fields.size());
  parallel_for(fields.size(), threads, [&](std::size_t i) {
    sets[i] = anisotropic_wavelet_transform(fields[i], D, jmax, a.filter_order);
    est[i] = critical_exponent_estimate(sets[i], p, q, eo);
  });

  ensure_dir(a.out);
  const fs::path out(a.out);
  json summary;
  summary["anisotropy"] = D.lambda;
  summary["p"] = a.p;
  summary["q"] = a.q;
  summary["filter_order"] = a.filter_order;
  summary["realizations"] = json::array();
  std::vector<double> alpha;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    std::ostringstream tag;
    tag << std::setw(5) << std::setfill('0') << fields[i].replicate;
    write_text(out / ("exponent_" + tag.str() + ".json"), exponent_json(est[i]).dump(2) + "\n");
    write_text(out / ("regression_" + tag.str() + ".csv"), regression_csv(est[i]));
    if (a.coefficients == "csv") write_text(out / ("coefficients_" + tag.str() + ".csv"), coefficients_csv(sets[i]));
    if (a.coefficients == "binary") write_coefficients_binary(out / ("coefficients_" + tag.str()), sets[i]);
    summary["realizations"].push_back({{"replicate", fields[i].replicate}, {"alpha_hat", est[i].alpha_hat}});
    alpha.push_back(est[i].alpha_hat);
  }
  double m = 0, s = 0;
  for (double v : alpha) m += v;
  m /= alpha.size();
  for (double v : alpha) s += (v - m) * (v - m);
  summary["alpha_hat"] = m;
  summary["alpha_stderr"] = alpha.size() > 1 ? std::sqrt(s / (alpha.size() - 1) / alpha.size()) : est[0].slope_stderr;

  if (fields.size() >= 2) {
    std::vector<std::vector<double>> lags;
    const auto& g = fields[0].spec.grid;
    for (std::size_t r = 0; r < g.n.size(); ++r)
      for (long k = 1; 2 * k < static_cast<long>(g.n[r]) && k <= 32; k *= 2) {
        std::vector<double> h(g.n.size(), 0.0);
        h[r] = k * g.spacing[r];
        lags.push_back(h);
      }
    write_text(out / "variogram.csv", variogram_csv(variogram_estimate(fields, lags)));
  }
  write_text(out / "analysis.json", summary.dump(2) + "\n");
  std::cout << "alpha_hat = " << m << " over " << fields.size() << " realization(s)\n";
  return ok;
}

// ------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string in, out, family, parallelism = "1", p = "2", q = "2", jrange;
  int filter_order = 4;
};

CandidateFamily read_family(const std::string& path) {
  if (path.empty()) return candidate_grid(2, 0.6, 1.4, 0.1);
  json j = parse_json(read_text(path), path);
  try {
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      auto fam = candidate_grid(g.value("d", 2), g.at("lo").get<double>(), g.at("hi").get<double>(),
                                g.at("step").get<double>());
      if (j.contains("description")) fam.description = j["description"].get<std::string>();
      return fam;
    }
    const json& list = j.is_array() ? j : j.at("matrices");
    std::vector<Matrix> mats;
    for (const auto& m : list) mats.push_back(matrix_from_json(m, "candidate"));
    return family_from_matrices(mats, j.is_object() ? j.value("description", path) : path);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::bad_input, path + ": malformed family (" + e.what() + ")");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::bad_input) throw;
    throw Error(ErrorKind::bad_input, path + ": " + e.what());
  }
}

int estimate(const EstimateArgs& a) {
  SearchOptions opt;
  opt.p = parse_exponent(a.p, "p");
  opt.q = parse_exponent(a.q, "q");
  opt.filter_order = a.filter_order;
  opt.estimate.j_range = parse_jrange(a.jrange);
  opt.threads = parse_parallelism(a.parallelism);
  auto fam = read_family(a.family);
  auto fields = load_all(a.in);
  auto res = anisotropy_search(fields, fam, opt);
  ensure_dir(a.out);
  const fs::path out(a.out);
  write_text(out / "search.json", search_json(res, fam).dump(2) + "\n");
  write_text(out / "curve.csv", curve_csv(res, &fields[0].spec));
  std::cout << "argmax " << res.per_candidate[res.argmax].candidate.label << ", H_hat = " << res.H_hat << "\n";
  return ok;
}

// ------------------------------------------------------------- selftest

struct Check {
  std::string name;
  std::function<std::string()> run;  // empty string on success
};

std::string fmt(const char* what, double got, double limit) {
  std::ostringstream os;
  os << what << " = " << got << " (limit " << limit << ")";
  return os.str();
}

std::vector<Check> selftest_checks(bool fault) {
  std::vector<Check> c;
  c.push_back({"linalg.exp_group", [] {
                 Matrix E(2, 2);
                 E << 1.1, 0.3, -0.2, 0.9;
                 double err = max_abs(matrix_power(E, 2.0) * matrix_power(E, 3.5) - matrix_power(E, 7.0));
                 return err <= 1e-10 * max_abs(matrix_power(E, 7.0)) ? "" : fmt("residual", err, 1e-10);
               }});
  c.push_back({"linalg.jordan_decomposition", [] {
                 Matrix E(2, 2);
                 E << 1.0, 1.0, 0.0, 1.0;
                 auto r = jordan_residual(E, jordan_additive_decompose(E));
                 double worst = std::max({r.recomposition, r.commutator, r.nilpotency, r.d_imag});
                 return worst <= 1e-9 ? "" : fmt("residual", worst, 1e-9);
               }});
  c.push_back({"pseudonorm.homogeneity", [] {
                 std::mt19937_64 gen(1);
                 Matrix E(2, 2);
                 E << 1.2, 0.3, 0.0, 0.8;
                 AnisotropyMatrix A(E);
                 std::vector<std::pair<PseudoNorm, double>> norms{{diagonal_pseudonorm({1.3, 0.7}), 1e-6},
                                                                  {integral_pseudonorm(A), 1e-3}};
                 double worst = 0;
                 for (auto& [rho, tol] : norms)
                   for (int i = 0; i < 10; ++i) {
                     Vector x = detail::sample_point(gen, 2, 1.0, 1.0);
                     double s = std::exp(std::uniform_real_distribution<double>(std::log(0.1), std::log(10))(gen));
                     Vector y = rho.homogeneity().power(s) * x;
                     worst = std::max(worst, std::abs(rho(y) - s * rho(x)) / (s * rho(x)) / tol);
                   }
                 return worst <= 1 ? "" : fmt("relative error / tolerance", worst, 1);
               }});
  c.push_back({"pseudonorm.polar_roundtrip", [] {
                 std::mt19937_64 gen(2);
                 auto rho = diagonal_pseudonorm({1.4, 0.6});
                 double worst = 0;
                 for (int i = 0; i < 50; ++i) {
                   Vector x = detail::sample_point(gen, 2, 0.01, 100);
                   auto pp = polar_decompose(rho, x);
                   worst = std::max(worst, (polar_compose(rho, pp) - x).norm() / x.norm());
                   worst = std::max(worst, std::abs(rho(pp.theta) - 1.0));
                 }
                 return worst <= 1e-8 ? "" : fmt("error", worst, 1e-8);
               }});
  c.push_back({"pseudonorm.quasi_triangle", [] {
                 auto t = quasi_triangle_constant(diagonal_pseudonorm({1.5, 0.5}), 2000, 3);
                 return std::isfinite(t.constant) && t.constant >= 0.5 && t.constant < 10 ? ""
                                                                                        : fmt("C", t.constant, 10);
               }});
  c.push_back({"synthesis.determinism", [] {
                 FieldSpec s = default_spec();
                 s.grid = {{32, 32}, {1.0 / 32, 1.0 / 32}};
                 s.spectral = {{32, 32}, 2};
                 SpectralSynthesizer syn(s);
                 auto a = syn.realize_batch(0, 3, 1), b = syn.realize_batch(0, 3, 3);
                 for (int i = 0; i < 3; ++i)
                   if (a[i].values.data != b[i].values.data) return std::string("thread count changed the output");
                 return std::string(syn.realize(0).values.data == a[0].values.data ? "" : "rerun differs");
               }});
  c.push_back({"synthesis.scaling_law", [] {
                 FieldSpec s = default_spec();
                 s.grid = {{64, 64}, {1.0 / 64, 1.0 / 64}};
                 s.spectral = {{64, 64}, 2};
                 ScalingOptions o;
                 o.axis_steps = {2, 4};
                 o.tolerance = 0.1;
                 auto r = scaling_law_check(s, 2.0, 40, o);
                 return r.pass ? "" : fmt("|H_hat - H0|", std::abs(r.H_hat - s.H0), o.tolerance);
               }});
  auto filter = daubechies(4);
  if (fault) {
    filter.lo[1] = -filter.lo[1];
    filter.hi = quadrature_mirror(filter.lo);
  }
  c.push_back({"wavelet.parseval", [filter] {
                 std::mt19937_64 gen(4);
                 std::normal_distribution<double> n;
                 NdArray x({32, 32});
                 for (double& v : x.data) v = n(gen);
                 std::vector<double> sp{0.5, 2.0};
                 SeparablePyramid pyr(x, sp, filter);
                 DiagonalAnisotropy D({1.2, 0.8});
                 auto set = anisotropic_wavelet_transform(pyr, D, complete_scale(D, pyr.levels()), sp);
                 double e_in = 0, e_out = 0;
                 for (double v : x.data) e_in += v * v;
                 for (const auto& b : set.branches)
                   for (double v : b.values.data) e_out += v * v / std::exp2(b.index.trace());
                 double rel = std::abs(e_out - e_in) / e_in;
                 return rel <= 1e-10 ? "" : fmt("relative energy error", rel, 1e-10);
               }});
  c.push_back({"wavelet.reconstruction", [] {
                 std::mt19937_64 gen(5);
                 std::normal_distribution<double> n;
                 NdArray x({16, 64});
                 for (double& v : x.data) v = n(gen);
                 DiagonalAnisotropy D({0.7, 1.3});
                 auto set = anisotropic_wavelet_transform(x, {1.0, 1.0}, D, complete_scale(D, {4, 6}), 3);
                 auto y = reconstruct(set);
                 double worst = 0;
                 for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
                 return worst <= 1e-10 ? "" : fmt("max error", worst, 1e-10);
               }});
  c.push_back({"wavelet.filter_orthonormality", [] {
                 double worst = 0;
                 for (int N = 1; N <= 10; ++N) worst = std::max(worst, orthonormality_residual(daubechies(N)));
                 return worst <= 1e-10 ? "" : fmt("residual", worst, 1e-10);
               }});
  c.push_back({"besov.loglinear_exponent", [] {
                 DiagonalAnisotropy D({1.2, 0.8});
                 std::vector<int> levels{7, 7};
                 auto set = empty_coefficient_set(D, levels, max_unclamped_scale(D, levels), 4);
                 for (auto& b : set.branches)
                   for (double& v : b.values.data) v = std::exp2(-0.7 * b.j);
                 double a = critical_exponent_estimate(set, 2, 2).alpha_hat;
                 return std::abs(a - 0.7) <= 1e-10 ? "" : fmt("alpha_hat - 0.7", a - 0.7, 1e-10);
               }});
  c.push_back({"besov.norm_monotone_in_s", [] {
                 std::mt19937_64 gen(6);
                 std::uniform_real_distribution<double> u(-1e-4, 1e-4);
                 DiagonalAnisotropy D({1.2, 0.8});
                 auto set = empty_coefficient_set(D, {6, 6}, 5, 4);
                 for (auto& b : set.branches)
                   for (double& v : b.values.data) v = u(gen);
                 double prev = 0;
                 for (double s = -1; s <= 3; s += 0.5) {
                   double v = besov_norm(set, BesovSpec{s, 2, 2, 0, D});
                   if (v < prev) return std::string("norm decreased in s");
                   prev = v;
                 }
                 return std::string();
               }});
  c.push_back({"estimate.tent_fit", [] {
                 std::vector<std::pair<double, double>> curve;
                 for (int i = 0; i <= 8; ++i) {
                   double l = 0.6 + 0.1 * i;
                   curve.push_back({l, 0.4 * std::min(l / 1.2, (2 - l) / 0.8)});
                 }
                 auto t = fit_tent(curve);
                 return std::abs(t.lambda0 - 1.2) <= 2e-3 ? "" : fmt("lambda0 - 1.2", t.lambda0 - 1.2, 2e-3);
               }});
  c.push_back({"estimate.amplitude_invariance", [] {
                 FieldSpec s = default_spec();
                 s.grid = {{64, 64}, {1.0 / 64, 1.0 / 64}};
                 s.spectral = {{64, 64}, 2};
                 auto f = SpectralSynthesizer(s).realize(0);
                 auto g = f;
                 for (double& v : g.values.data) v *= 5.0;
                 auto fam = candidate_grid(2, 0.9, 1.1, 0.1);
                 auto a = anisotropy_search({f}, fam), b = anisotropy_search({g}, fam);
                 for (std::size_t i = 0; i < a.curve.size(); ++i)
                   if (std::abs(a.curve[i].second - b.curve[i].second) > 1e-12) return std::string("curve changed");
                 return std::string(a.argmax == b.argmax ? "" : "argmax changed");
               }});
  return c;
}

int selftest(bool fault, const std::string& report) {
  int failed = 0;
  std::ostringstream out;
  for (const auto& c : selftest_checks(fault)) {
    auto t0 = std::chrono::steady_clock::now();
    std::string msg;
    try {
      msg = c.run();
    } catch (const std::exception& e) {
      msg = std::string("threw: ") + e.what();
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << (msg.empty() ? "PASS " : "FAIL ") << c.name;
    if (!msg.empty()) line << ": " << msg;
    line << " [" << std::fixed << std::setprecision(0) << ms << " ms]";
    out << line.str() << "\n";
    std::cout << line.str() << std::endl;
    failed += !msg.empty();
  }
  out << (failed ? std::to_string(failed) + " check(s) failed" : "all checks passed") << "\n";
  std::cout << (failed ? std::to_string(failed) + " check(s) failed" : "all checks passed") << "\n";
  if (!report.empty()) {
    ensure_dir(report);
    write_text(fs::path(report) / "selftest_report.txt", out.str());
  }
  return failed ? selftest_failed : ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operator scaling Gaussian random field simulator and anisotropy estimator"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "synthesize realizations");
  s->add_option("--spec", sim.spec, "field spec JSON")->required();
  s->add_option("--out", sim.out, "output directory")->required();
  s->add_option("--replicates", sim.replicates, "number of realizations")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "override the spec seed");
  s->add_option("--parallelism", sim.parallelism, "worker threads or auto");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "wavelet coefficients, variogram and exponent estimates");
  a->add_option("--in", an.in, "directory with realization files")->required();
  a->add_option("--out", an.out, "output directory")->required();
  a->add_option("--p", an.p, "p exponent (number or inf)");
  a->add_option("--q", an.q, "q exponent (number or inf)");
  a->add_option("--jrange", an.jrange, "scales LO:HI for the fit");
  a->add_option("--anisotropy", an.anisotropy, "diagonal exponents, e.g. 1.2,0.8");
  a->add_option("--filter-order", an.filter_order, "Daubechies order")->check(CLI::Range(1, 10));
  a->add_option("--coefficients", an.coefficients, "none, csv or binary");
  a->add_option("--parallelism", an.parallelism, "worker threads or auto");

  EstimateArgs es;
  auto* e = app.add_subcommand("estimate", "anisotropy search over a candidate family");
  e->add_option("--in", es.in, "directory with realization files")->required();
  e->add_option("--out", es.out, "output directory")->required();
  e->add_option("--family", es.family, "candidate family JSON");
  e->add_option("--p", es.p, "p exponent (number or inf)");
  e->add_option("--q", es.q, "q exponent (number or inf)");
  e->add_option("--jrange", es.jrange, "scales LO:HI for the fit");
  e->add_option("--filter-order", es.filter_order, "Daubechies order")->check(CLI::Range(1, 10));
  e->add_option("--parallelism", es.parallelism, "worker threads or auto");

  bool fault = false;
  std::string report;
  auto* t = app.add_subcommand("selftest", "run the invariant checks at reduced scale");
  t->add_option("--out", report, "directory for selftest_report.txt");
  t->add_flag("--inject-fault", fault, "flip one filter tap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return bad_input;
  }

  try {
    if (*s) return simulate(sim);
    if (*a) return analyze(an);
    if (*e) return estimate(es);
    if (*t) return selftest(fault, report);
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return ex.kind() == ErrorKind::io ? io_failure : bad_input;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return bad_input;
  }
  return ok;
}
