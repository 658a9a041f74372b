#include "cplane/random.hpp"

#include <cmath>
#include <numbers>

namespace cplane {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t label_hash(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t derive_key(std::uint64_t seed, std::string_view label,
                         std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t key = mix64(seed ^ mix64(label_hash(label)));
  for (std::uint64_t step : path) {
    key = mix64(key ^ mix64(step + 0x632BE59BD9B4E019ULL));
  }
  return key;
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
}  // namespace

Stream::Stream(std::uint64_t key) noexcept {
  std::uint64_t z = key;
  for (auto& word : s_) {
    z += 0x9E3779B97F4A7C15ULL;
    word = mix64(z);
  }
}

std::uint64_t Stream::next() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Stream::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Stream::uniform_open() noexcept {
  return (static_cast<double>(next() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t Stream::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Stream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

}  // namespace cplane
