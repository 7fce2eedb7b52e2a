#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace pop {

enum class ErrorKind {
  invalid_argument,
  constraint,
  not_psd,
  numeric,
  io,
  insufficient_data,
};

/// Typed error carried across the library; the C API maps kind() to a status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

// mt19937_64 output is pinned by the standard. The transforms below are spelled
// out (instead of std::*_distribution, whose streams are implementation-defined)
// so that seeded runs replay identically across toolchains.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double gaussian(std::mt19937_64& gen) {
  double u1 = uniform01(gen);
  double u2 = uniform01(gen);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Uniform index in [0, n). Modulo bias is irrelevant at the scales used here.
inline std::size_t uniform_index(std::mt19937_64& gen, std::size_t n) {
  return static_cast<std::size_t>(gen() % n);
}

}  // namespace pop
