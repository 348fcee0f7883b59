#pragma once

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "osgrf/estimate.hpp"

namespace osgrf {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ------------------------------------------------------------------ helpers

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::bad_input, "cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  out << s;
  if (!out) throw Error(ErrorKind::io, "write failed for " + p.string());
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw Error(ErrorKind::io, "cannot create directory " + p.string());
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::bad_input, what + ": " + e.what());
  }
}

// Shortest round-trip formatting for CSV cells.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ------------------------------------------------------------------ specs

inline json matrix_json(const Matrix& m) { return matrix_to_rows(m); }

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::invalid_spec, what + " must be a non-empty array of rows");
  std::vector<std::vector<double>> rows;
  for (const auto& r : j) {
    if (!r.is_array()) throw Error(ErrorKind::invalid_spec, what + " rows must be arrays");
    std::vector<double> row;
    for (const auto& v : r) {
      if (!v.is_number()) throw Error(ErrorKind::invalid_spec, what + " entries must be numbers");
      row.push_back(v.get<double>());
    }
    if (row.size() != j.size()) throw Error(ErrorKind::invalid_spec, what + " must be square");
    rows.push_back(row);
  }
  return matrix_from_rows(rows);
}

inline json pseudonorm_json(const PseudoNorm& rho) {
  json j;
  switch (rho.kind()) {
    case PseudoNorm::Kind::diagonal_sum:
      j["kind"] = "diagonal";
      j["lambda"] = rho.lambda();
      j["scale"] = rho.scale();
      break;
    case PseudoNorm::Kind::integral:
      j["kind"] = "integral";
      j["profile"] = {{"shape", rho.profile().shape == BumpProfile::Shape::smooth ? "smooth" : "indicator"},
                      {"r_in", rho.profile().r_in},
                      {"r_out", rho.profile().r_out}};
      break;
    case PseudoNorm::Kind::euclidean:
      j["kind"] = "euclidean";
      break;
  }
  j["homogeneity"] = matrix_json(rho.homogeneity().entries());
  return j;
}

template <class T>
T get_field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw Error(ErrorKind::invalid_spec, ctx + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::invalid_spec, ctx + ": \"" + key + "\" has the wrong type");
  }
}

// Pseudo-norm for homogeneity E0^T; `j` may be null for the default choice.
inline PseudoNorm pseudonorm_from_json(const json& j, const AnisotropyMatrix& E0) {
  const AnisotropyMatrix Et = E0.transposed();
  const int d = E0.dim();
  std::string kind = "auto";
  if (!j.is_null()) kind = get_field<std::string>(j, "kind", "pseudonorm");
  if (kind == "auto") kind = Et.is_diagonal() ? "diagonal" : "integral";
  if (!j.is_null() && j.contains("homogeneity")) {
    Matrix H = matrix_from_json(j["homogeneity"], "pseudonorm homogeneity");
    if (H.rows() != d || (H - Et.entries()).cwiseAbs().maxCoeff() > 1e-12)
      throw Error(ErrorKind::invalid_spec, "pseudonorm homogeneity must be the transpose of E0");
  }
  if (kind == "diagonal") {
    if (!Et.is_diagonal()) throw Error(ErrorKind::invalid_spec, "diagonal pseudonorm needs a diagonal E0");
    std::vector<double> lam(d);
    for (int r = 0; r < d; ++r) lam[r] = Et.entries()(r, r);
    if (!j.is_null() && j.contains("lambda")) {
      auto given = get_field<std::vector<double>>(j, "lambda", "pseudonorm");
      if (given.size() != lam.size()) throw Error(ErrorKind::invalid_spec, "pseudonorm lambda has the wrong length");
      for (int r = 0; r < d; ++r)
        if (std::abs(given[r] - lam[r]) > 1e-12)
          throw Error(ErrorKind::invalid_spec, "pseudonorm lambda must equal the diagonal of E0");
    }
    double scale = (!j.is_null() && j.contains("scale")) ? get_field<double>(j, "scale", "pseudonorm") : 1.0;
    return diagonal_pseudonorm(lam, scale);
  }
  if (kind == "integral") {
    BumpProfile prof;
    if (!j.is_null() && j.contains("profile")) {
      const json& p = j["profile"];
      if (p.contains("shape")) {
        auto s = get_field<std::string>(p, "shape", "profile");
        if (s == "smooth")
          prof.shape = BumpProfile::Shape::smooth;
        else if (s == "indicator")
          prof.shape = BumpProfile::Shape::indicator;
        else
          throw Error(ErrorKind::invalid_spec, "profile shape must be smooth or indicator");
      }
      if (p.contains("r_in")) prof.r_in = get_field<double>(p, "r_in", "profile");
      if (p.contains("r_out")) prof.r_out = get_field<double>(p, "r_out", "profile");
    }
    return integral_pseudonorm(Et, prof);
  }
  if (kind == "euclidean") {
    if ((Et.entries() - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > 0)
      throw Error(ErrorKind::invalid_spec, "euclidean pseudonorm needs E0 = Id");
    return euclidean_pseudonorm(d);
  }
  throw Error(ErrorKind::invalid_spec, "unknown pseudonorm kind \"" + kind + "\"");
}

inline json spec_json(const FieldSpec& s) {
  json j;
  j["E0"] = matrix_json(s.E0.entries());
  j["H0"] = s.H0;
  j["pseudonorm"] = pseudonorm_json(s.rho);
  j["grid"] = {{"n", s.grid.n}, {"spacing", s.grid.spacing}};
  j["spectral"] = {{"lattice", s.lattice()}, {"rings", s.spectral.rings}};
  j["seed"] = s.seed;
  return j;
}

inline FieldSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::invalid_spec, "spec must be a JSON object");
  FieldSpec s;
  try {
    s.E0 = AnisotropyMatrix(matrix_from_json(j.at("E0"), "E0"));
  } catch (const json::exception&) {
    throw Error(ErrorKind::invalid_spec, "spec: missing \"E0\"");
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_spec, std::string("E0: ") + e.what());
  }
  const int d = s.E0.dim();
  s.H0 = get_field<double>(j, "H0", "spec");
  const json& g = j.contains("grid") ? j["grid"] : json();
  if (g.is_null()) throw Error(ErrorKind::invalid_spec, "spec: missing \"grid\"");
  s.grid.n = get_field<std::vector<std::size_t>>(g, "n", "grid");
  if (static_cast<int>(s.grid.n.size()) != d) throw Error(ErrorKind::invalid_spec, "grid n must have one entry per axis");
  for (auto n : s.grid.n)
    if (n == 0) throw Error(ErrorKind::invalid_spec, "grid sizes must be positive");
  if (g.contains("spacing")) {
    s.grid.spacing = get_field<std::vector<double>>(g, "spacing", "grid");
  } else {
    for (auto n : s.grid.n) s.grid.spacing.push_back(1.0 / static_cast<double>(n));
  }
  if (static_cast<int>(s.grid.spacing.size()) != d) throw Error(ErrorKind::invalid_spec, "grid spacing must have one entry per axis");
  for (double h : s.grid.spacing)
    if (!(h > 0) || !std::isfinite(h)) throw Error(ErrorKind::invalid_spec, "grid spacing must be positive");
  if (j.contains("spectral")) {
    const json& sp = j["spectral"];
    if (sp.contains("lattice")) s.spectral.lattice = get_field<std::vector<std::size_t>>(sp, "lattice", "spectral");
    if (sp.contains("rings")) s.spectral.rings = get_field<int>(sp, "rings", "spectral");
  }
  if (s.spectral.rings < 0) throw Error(ErrorKind::invalid_spec, "spectral rings must be non-negative");
  if (j.contains("seed")) s.seed = get_field<std::uint64_t>(j, "seed", "spec");
  try {
    s.rho = pseudonorm_from_json(j.contains("pseudonorm") ? j["pseudonorm"] : json(), s.E0);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::invalid_spec) throw;
    throw Error(ErrorKind::invalid_spec, std::string("pseudonorm: ") + e.what());
  }
  s.validate();
  return s;
}

inline std::string spec_hash(const FieldSpec& s) { return hex64(fnv1a(spec_json(s).dump())); }

// ------------------------------------------------------------ realizations

inline void write_f64(const fs::path& p, const std::vector<double>& v) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  } else {
    for (double x : v) {
      auto u = std::bit_cast<std::uint64_t>(x);
      char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
      out.write(b, 8);
    }
  }
  if (!out) throw Error(ErrorKind::io, "write failed for " + p.string());
}

inline std::vector<double> read_f64(const fs::path& p, std::size_t count) {
  std::ifstream in(p, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorKind::bad_input, "cannot read " + p.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != count * 8)
    throw Error(ErrorKind::bad_input, p.string() + ": expected " + std::to_string(count * 8) + " bytes, found " +
                                          std::to_string(size) + (size < count * 8 ? " (truncated)" : ""));
  in.seekg(0);
  std::vector<unsigned char> raw(size);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(raw[i * 8 + b]) << (8 * b);
    v[i] = std::bit_cast<double>(u);
  }
  return v;
}

inline std::string realization_stem(std::uint64_t replicate) {
  std::ostringstream os;
  os << "realization_" << std::setw(5) << std::setfill('0') << replicate;
  return os.str();
}

inline json realization_header(const FieldRealization& f, const std::string& data_file) {
  json j;
  j["d"] = f.spec.dim();
  j["grid"] = f.spec.grid.n;
  j["spacing"] = f.spec.grid.spacing;
  j["E0"] = matrix_json(f.spec.E0.entries());
  j["H0"] = f.spec.H0;
  j["pseudonorm"] = pseudonorm_json(f.spec.rho);
  j["spectral"] = {{"lattice", f.spec.lattice()}, {"rings", f.spec.spectral.rings}};
  j["seed"] = f.spec.seed;
  j["replicate"] = f.replicate;
  j["endianness"] = "little";
  j["dtype"] = "f64";
  j["data"] = data_file;
  return j;
}

// Writes <stem>.json and <stem>.bin into dir; returns the header file name.
inline std::string write_realization(const fs::path& dir, const FieldRealization& f) {
  const std::string stem = realization_stem(f.replicate);
  write_f64(dir / (stem + ".bin"), f.values.data);
  write_text(dir / (stem + ".json"), realization_header(f, stem + ".bin").dump(2) + "\n");
  return stem + ".json";
}

inline FieldRealization read_realization(const fs::path& header) {
  const std::string name = header.string();
  json j = parse_json(read_text(header), name);
  FieldRealization f;
  try {
    if (j.value("dtype", "") != "f64" || j.value("endianness", "") != "little")
      throw Error(ErrorKind::bad_input, name + ": only little-endian f64 data is supported");
    json spec;
    spec["E0"] = j.at("E0");
    spec["H0"] = j.at("H0");
    spec["grid"] = {{"n", j.at("grid")}, {"spacing", j.at("spacing")}};
    if (j.contains("spectral")) spec["spectral"] = j["spectral"];
    spec["pseudonorm"] = j.at("pseudonorm");
    spec["seed"] = j.at("seed");
    f.spec = spec_from_json(spec);
    f.replicate = j.at("replicate").get<std::uint64_t>();
    f.values = NdArray(f.spec.grid.n);
    f.values.data = read_f64(header.parent_path() / j.at("data").get<std::string>(), f.values.size());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::bad_input, name + ": malformed header (" + e.what() + ")");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::bad_input) throw;
    throw Error(ErrorKind::bad_input, name + ": " + e.what());
  }
  for (double v : f.values.data)
    if (!std::isfinite(v)) throw Error(ErrorKind::bad_input, name + ": non-finite sample");
  return f;
}

inline json manifest_json(const FieldSpec& spec, const std::vector<std::string>& headers,
                          const std::vector<std::uint64_t>& replicates) {
  json j;
  j["spec"] = spec_json(spec);
  j["spec_hash"] = spec_hash(spec);
  j["seed"] = spec.seed;
  j["replicates"] = replicates.size();
  j["files"] = json::array();
  for (std::size_t i = 0; i < headers.size(); ++i) {
    std::string bin = headers[i].substr(0, headers[i].size() - 5) + ".bin";
    j["files"].push_back({{"header", headers[i]}, {"data", bin}, {"replicate", replicates[i]}, {"seed", spec.seed}});
  }
  return j;
}

// Realization headers in dir: from manifest.json if present, otherwise all
// realization_*.json files in name order.
inline std::vector<fs::path> list_realizations(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::bad_input, "input directory " + dir.string() + " does not exist");
  std::vector<fs::path> out;
  if (fs::exists(dir / "manifest.json")) {
    json m = parse_json(read_text(dir / "manifest.json"), (dir / "manifest.json").string());
    if (!m.contains("files") || !m["files"].is_array()) throw Error(ErrorKind::bad_input, "manifest.json has no file list");
    for (const auto& f : m["files"]) out.push_back(dir / f.at("header").get<std::string>());
  } else {
    for (const auto& e : fs::directory_iterator(dir)) {
      auto name = e.path().filename().string();
      if (name.rfind("realization_", 0) == 0 && e.path().extension() == ".json" &&
          name.find(".exponent") == std::string::npos)
        out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
  }
  if (out.empty()) throw Error(ErrorKind::bad_input, "no realization files in " + dir.string());
  return out;
}

// ----------------------------------------------------------------- exports

inline std::string variogram_csv(const Variogram& vg) {
  std::ostringstream os;
  const std::size_t d = vg.lags.empty() ? 0 : vg.lags[0].size();
  for (std::size_t r = 0; r < d; ++r) os << "h_" << r + 1 << ",";
  os << "v,stderr\n";
  for (std::size_t i = 0; i < vg.lags.size(); ++i) {
    for (double h : vg.lags[i]) os << num(h) << ",";
    os << num(vg.v[i]) << "," << num(vg.stderr_[i]) << "\n";
  }
  return os.str();
}

inline std::string coefficients_csv(const WaveletCoefficientSet& set) {
  std::ostringstream os;
  const int d = set.anisotropy.dim();
  os << "j,G";
  for (int r = 0; r < d; ++r) os << ",gamma_" << r + 1;
  for (int r = 0; r < d; ++r) os << ",k_" << r + 1;
  os << ",value\n";
  for (const auto& b : set.branches)
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      os << b.j << "," << b.index.G;
      for (int g : b.index.gamma) os << "," << g;
      for (auto k : b.values.unflat(i)) os << "," << k;
      os << "," << num(b.values[i]) << "\n";
    }
  return os.str();
}

// One .bin per branch plus a JSON header describing the set.
inline void write_coefficients_binary(const fs::path& dir, const WaveletCoefficientSet& set) {
  ensure_dir(dir);
  json j;
  j["anisotropy"] = set.anisotropy.lambda;
  j["filter_order"] = set.filter_order;
  j["levels"] = set.levels;
  j["spacing"] = set.spacing;
  j["endianness"] = "little";
  j["dtype"] = "f64";
  j["branches"] = json::array();
  for (std::size_t i = 0; i < set.branches.size(); ++i) {
    const auto& b = set.branches[i];
    std::ostringstream name;
    name << "branch_" << std::setw(4) << std::setfill('0') << i << ".bin";
    write_f64(dir / name.str(), b.values.data);
    j["branches"].push_back(
        {{"j", b.j}, {"G", b.index.G}, {"gamma", b.index.gamma}, {"shape", b.values.shape}, {"data", name.str()}});
  }
  write_text(dir / "coefficients.json", j.dump(2) + "\n");
}

inline WaveletCoefficientSet read_coefficients_binary(const fs::path& dir) {
  json j = parse_json(read_text(dir / "coefficients.json"), (dir / "coefficients.json").string());
  WaveletCoefficientSet set;
  try {
    set.anisotropy = DiagonalAnisotropy(j.at("anisotropy").get<std::vector<double>>());
    set.filter_order = j.at("filter_order").get<int>();
    set.levels = j.at("levels").get<std::vector<int>>();
    set.spacing = j.at("spacing").get<std::vector<double>>();
    for (const auto& b : j.at("branches")) {
      CoefficientBranch cb;
      cb.j = b.at("j").get<int>();
      cb.index.G = b.at("G").get<std::string>();
      cb.index.gamma = b.at("gamma").get<std::vector<int>>();
      cb.values = NdArray(b.at("shape").get<std::vector<std::size_t>>());
      cb.values.data = read_f64(dir / b.at("data").get<std::string>(), cb.values.size());
      set.branches.push_back(std::move(cb));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::bad_input, "malformed coefficient header: " + std::string(e.what()));
  }
  return set;
}

inline json exponent_json(const ExponentEstimate& e) {
  json j;
  j["anisotropy"] = e.anisotropy.lambda;
  j["p"] = std::isinf(e.p) ? json("inf") : json(e.p);
  j["q"] = std::isinf(e.q) ? json("inf") : json(e.q);
  j["alpha_hat"] = e.alpha_hat;
  j["slope_stderr"] = e.slope_stderr;
  j["j_range"] = {e.j_lo, e.j_hi};
  j["per_scale"] = json::array();
  for (std::size_t i = 0; i < e.per_scale.size(); ++i)
    j["per_scale"].push_back(
        {{"j", e.per_scale[i].j}, {"S_j", e.per_scale[i].S}, {"n_j", e.per_scale[i].n}, {"y", e.y[i]}});
  return j;
}

inline std::string regression_csv(const ExponentEstimate& e) {
  std::ostringstream os;
  os << "j,log2_Sj,n_j,normalized\n";
  for (std::size_t i = 0; i < e.per_scale.size(); ++i)
    os << e.per_scale[i].j << "," << num(std::log2(e.per_scale[i].S)) << "," << e.per_scale[i].n << "," << num(e.y[i])
       << "\n";
  return os.str();
}

inline json search_json(const SearchResult& r, const CandidateFamily& fam) {
  json j;
  j["family"] = fam.description;
  j["argmax"] = r.per_candidate[r.argmax].candidate.label;
  j["argmax_lambda"] = r.argmax_anisotropy.lambda;
  j["argmax_param"] = r.per_candidate[r.argmax].candidate.param;
  j["H_hat"] = r.H_hat;
  j["vote_argmax"] = r.per_candidate[r.vote_argmax].candidate.label;
  bool outside = false;
  j["candidates"] = json::array();
  for (const auto& c : r.per_candidate) {
    json cj;
    cj["label"] = c.candidate.label;
    cj["param"] = c.candidate.param;
    cj["lambda"] = c.candidate.anisotropy.lambda;
    cj["alpha_hat"] = c.alpha_mean;
    cj["stderr"] = c.alpha_stderr;
    cj["votes"] = c.votes;
    cj["alpha_per_realization"] = json::array();
    for (const auto& e : c.estimates) cj["alpha_per_realization"].push_back(e.alpha_hat);
    if (std::isnan(c.alpha_mean)) cj["note"] = "not estimable: fewer than 4 usable scales";
    if (c.candidate.outside_hypothesis) {
      cj["note"] = "outside theorem hypothesis";
      outside = true;
    }
    j["candidates"].push_back(cj);
  }
  if (outside) j["note"] = "outside theorem hypothesis";
  j["curve"] = json::array();
  for (const auto& [p, a] : r.curve) j["curve"].push_back({p, a});
  return j;
}

// alpha_predicted is left empty unless E0 is diagonal.
inline std::string curve_csv(const SearchResult& r, const FieldSpec* truth) {
  std::ostringstream os;
  os << "lambda,alpha_hat,stderr,alpha_predicted\n";
  for (const auto& c : r.per_candidate) {
    os << num(c.candidate.param) << "," << num(c.alpha_mean) << "," << num(c.alpha_stderr) << ",";
    if (truth && truth->E0.is_diagonal()) {
      std::vector<double> e0;
      for (int r0 = 0; r0 < truth->dim(); ++r0) e0.push_back(truth->E0.entries()(r0, r0));
      os << num(predicted_alpha(e0, truth->H0, c.candidate.anisotropy));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace osgrf
