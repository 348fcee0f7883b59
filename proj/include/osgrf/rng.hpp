#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace osgrf {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stateless generator: every (seed, stream, index, draw) tuple maps to an
// independent 64-bit word, so draws do not depend on evaluation order.
inline std::uint64_t counter_word(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                                  std::uint64_t draw) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ index);
  return splitmix64(h ^ (draw * 0xd1b54a32d192ed03ULL));
}

// Uniform on the open interval (0, 1).
inline double unit_open(std::uint64_t w) { return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53; }

// Circular complex Gaussian with E|g|^2 = 1.
inline std::complex<double> complex_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  double u1 = unit_open(counter_word(seed, stream, index, 0));
  double u2 = unit_open(counter_word(seed, stream, index, 1));
  double r = std::sqrt(-std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

// Standard real Gaussian (Box-Muller, cosine branch).
inline double real_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  double u1 = unit_open(counter_word(seed, stream, index, 0));
  double u2 = unit_open(counter_word(seed, stream, index, 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace osgrf
