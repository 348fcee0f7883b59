#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace osgrf {

enum class ErrorKind {
  domain,
  numeric,
  invalid_anisotropy,
  invalid_spec,
  configuration,
  insufficient_data,
  bad_input,
  io
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::domain: return "domain error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::invalid_anisotropy: return "invalid anisotropy";
    case ErrorKind::invalid_spec: return "invalid spec";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::insufficient_data: return "insufficient data";
    case ErrorKind::bad_input: return "bad input";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Dense d-dimensional array of doubles, row-major (last axis fastest).
struct NdArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  NdArray() = default;
  explicit NdArray(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(count(shape), fill) {}

  static std::size_t count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t flat(const std::vector<std::size_t>& idx) const {
    std::size_t f = 0;
    for (std::size_t r = 0; r < shape.size(); ++r) f = f * shape[r] + idx[r];
    return f;
  }
  std::vector<std::size_t> unflat(std::size_t f) const {
    std::vector<std::size_t> idx(shape.size());
    for (std::size_t r = shape.size(); r-- > 0;) {
      idx[r] = f % shape[r];
      f /= shape[r];
    }
    return idx;
  }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested == 0) {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
  return requested;
}

// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = hardware).
// Work is split into contiguous blocks; results must be written to
// per-index slots by the caller so output does not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  unsigned t = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(count, 1));
  if (t <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += t) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace osgrf
