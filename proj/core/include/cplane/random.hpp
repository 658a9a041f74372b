#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace cplane {

/// 64-bit finalizer from SplitMix64.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

/// Stable FNV-1a hash, used to turn stream labels into keys.
[[nodiscard]] std::uint64_t label_hash(std::string_view label) noexcept;

/// Derives a stream key from a root seed, a label and a path of counters
/// (replicate id, draw id, ...). Same inputs give the same key on every
/// platform and thread schedule.
[[nodiscard]] std::uint64_t derive_key(std::uint64_t seed, std::string_view label,
                                       std::initializer_list<std::uint64_t> path = {}) noexcept;

/// xoshiro256** generator seeded from a derived key. Uniforms and normals are
/// produced with portable transforms so streams are bit-identical across
/// standard libraries.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key) noexcept;
  Stream(std::uint64_t seed, std::string_view label, std::initializer_list<std::uint64_t> path = {}) noexcept
      : Stream(derive_key(seed, label, path)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cplane
