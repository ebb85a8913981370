#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace macau {

namespace detail {

// splitmix64; used to turn (seed, stream) identifiers into engine seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// A reproducible random stream identified by (seed, stream id).
///
/// Identical (seed, stream) pairs produce identical draw sequences. `fork`
/// derives a child stream from the identifiers alone, never from the engine
/// state, so stream assignment is independent of execution order and of the
/// number of draws already taken.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed),
        stream_(stream),
        engine_(detail::mix64(detail::mix64(seed) ^ detail::mix64(stream))) {}

  RngStream fork(std::uint64_t id) const {
    return RngStream(seed_, detail::mix64(stream_ ^ detail::mix64(id + 1)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  double normal() { return normal_(engine_); }

  /// Uniform on [0, 1).
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  /// Gamma draw with the given shape and rate (mean = shape / rate).
  double gamma_shape_rate(double shape, double rate) {
    if (shape <= 0.0 || rate <= 0.0)
      throw std::invalid_argument("gamma_shape_rate: parameters must be > 0");
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  double chi_squared(double dof) {
    if (dof <= 0.0) throw std::invalid_argument("chi_squared: dof must be > 0");
    return std::chi_squared_distribution<double>(dof)(engine_);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace macau
