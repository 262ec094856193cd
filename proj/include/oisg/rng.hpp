#pragma once

#include <cmath>
#include <cstdint>

namespace oisg {

// Counter-based generator (Philox2x64-10). A stream is (key, 128-bit counter);
// independent streams are derived from a root seed and a stream tag, so
// replicate/matrix/field/init draws stay reproducible across thread counts.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  // Derived stream: key = H(seed, tag, index).
  static Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
    return Rng(mix(mix(seed ^ mix(tag)) ^ index));
  }

  std::uint64_t next_u64() {
    if (have_buffered_) {
      have_buffered_ = false;
      return buffered_;
    }
    auto [a, b] = block();
    buffered_ = b;
    have_buffered_ = true;
    return a;
  }

  // Uniform on (0,1), never 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller, pair-buffered.
  double gaussian() {
    if (have_gauss_) {
      have_gauss_ = false;
      return gauss_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    gauss_ = r * std::sin(a);
    have_gauss_ = true;
    return r * std::cos(a);
  }

 private:
  std::pair<std::uint64_t, std::uint64_t> block() {
    std::uint64_t x0 = ctr_lo_, x1 = ctr_hi_;
    std::uint64_t k = key_;
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 prod =
          static_cast<unsigned __int128>(0xD2B74407B1CE6E93ULL) * x0;
      const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
      const std::uint64_t lo = static_cast<std::uint64_t>(prod);
      x0 = hi ^ k ^ x1;
      x1 = lo;
      k += 0x9E3779B97F4A7C15ULL;
    }
    if (++ctr_lo_ == 0) ++ctr_hi_;
    return {x0, x1};
  }

  std::uint64_t key_;
  std::uint64_t ctr_lo_ = 0, ctr_hi_ = 0;
  std::uint64_t buffered_ = 0;
  bool have_buffered_ = false;
  double gauss_ = 0.0;
  bool have_gauss_ = false;
};

// Stream tags used across the library.
namespace stream_tag {
inline constexpr std::uint64_t matrix = 0x4d41545249580001ULL;
inline constexpr std::uint64_t eigenvalues = 0x454947454e530002ULL;
inline constexpr std::uint64_t field = 0x4649454c44000003ULL;
inline constexpr std::uint64_t amp_init = 0x494e495400000004ULL;
inline constexpr std::uint64_t replicate = 0x5245504c49430005ULL;
inline constexpr std::uint64_t monte_carlo = 0x4d43000000000006ULL;
}  // namespace stream_tag

}  // namespace oisg
