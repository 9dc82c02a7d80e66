#ifndef MVLDP_RNG_HPP
#define MVLDP_RNG_HPP

// Counter-based random streams (Philox4x32-10). Every stream is a pure
// function of (seed, id0, id1, position), so per-particle draws do not
// depend on thread scheduling and runs are bit-reproducible at any
// thread count.

#include <cmath>
#include <cstdint>

namespace mvldp {

namespace detail {

struct PhiloxBlock {
  std::uint32_t v[4];
};

inline void philox_round(std::uint32_t& c0, std::uint32_t& c1, std::uint32_t& c2,
                         std::uint32_t& c3, std::uint32_t k0, std::uint32_t k1) {
  constexpr std::uint64_t m0 = 0xD2511F53ull;
  constexpr std::uint64_t m1 = 0xCD9E8D57ull;
  const std::uint64_t p0 = m0 * c0;
  const std::uint64_t p1 = m1 * c2;
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  const std::uint32_t r0 = hi1 ^ c1 ^ k0;
  const std::uint32_t r2 = hi0 ^ c3 ^ k1;
  c0 = r0;
  c1 = lo1;
  c2 = r2;
  c3 = lo0;
}

inline PhiloxBlock philox4x32_10(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                                 std::uint32_t c3, std::uint32_t k0, std::uint32_t k1) {
  constexpr std::uint32_t w0 = 0x9E3779B9u;
  constexpr std::uint32_t w1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    philox_round(c0, c1, c2, c3, k0, k1);
    k0 += w0;
    k1 += w1;
  }
  return PhiloxBlock{{c0, c1, c2, c3}};
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Derives an independent 64-bit seed from (seed, salt); used to give
// replicate runs and sub-experiments disjoint stream families.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return detail::splitmix64(seed ^ detail::splitmix64(salt));
}

// One logical random stream, addressed by (seed, id0, id1). id0 is the
// particle index by convention, id1 the noise source.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, std::uint64_t id0, std::uint64_t id1)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        c0_(static_cast<std::uint32_t>(id0)),
        c1_(static_cast<std::uint32_t>(id0 >> 32)),
        salt_(static_cast<std::uint32_t>(id1) ^ static_cast<std::uint32_t>(id1 >> 32)) {}

  std::uint32_t next_u32() {
    if (have_ == 0) refill();
    return block_.v[--have_];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform on (0,1): never returns 0 or 1, safe under log().
  double next_u01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Standard normal via Box-Muller; pairs are cached per stream.
  double next_normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    const double u1 = next_u01();
    const double u2 = next_u01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(a);
    have_cached_normal_ = true;
    return r * std::cos(a);
  }

  // Exponential with the given rate (mean 1/rate).
  double next_exponential(double rate) { return -std::log(next_u01()) / rate; }

 private:
  void refill() {
    block_ = detail::philox4x32_10(c0_, c1_, static_cast<std::uint32_t>(pos_),
                                   static_cast<std::uint32_t>(pos_ >> 32) ^ salt_, key0_,
                                   key1_);
    ++pos_;
    have_ = 4;
  }

  std::uint32_t key0_ = 0, key1_ = 0;
  std::uint32_t c0_ = 0, c1_ = 0, salt_ = 0;
  std::uint64_t pos_ = 0;
  detail::PhiloxBlock block_{};
  int have_ = 0;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// Noise-source ids, kept distinct so related simulations can share some
// streams (jump times) while not consuming each other's draws.
namespace rng_source {
constexpr std::uint64_t brownian = 1;
constexpr std::uint64_t jump_times = 2;
constexpr std::uint64_t marks = 3;
constexpr std::uint64_t thinning = 4;
constexpr std::uint64_t probes = 5;
constexpr std::uint64_t stencil = 6;
constexpr std::uint64_t optimizer = 7;
constexpr std::uint64_t bootstrap = 8;
constexpr std::uint64_t frozen_fast = 9;
}  // namespace rng_source

}  // namespace mvldp

#endif
