#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace rtpref {

// Counter-based pseudo-random numbers.
//
// Every logical stream (one per observation, replication, ...) is keyed by a
// list of 64-bit identifiers mixed through the SplitMix64 finalizer.  Streams
// are therefore independent of thread scheduling: observation i draws the
// same numbers no matter which thread samples it or in what order, which is
// what makes the parallel samplers bit-reproducible.

namespace detail {
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Collapses (seed, id_1, id_2, ...) into a single stream key.
inline std::uint64_t derive_key(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = seed;
  std::uint64_t k = detail::splitmix64_next(s);
  for (std::uint64_t id : ids) {
    s = k ^ (id + 0x9e3779b97f4a7c15ULL);
    k = detail::splitmix64_next(s);
  }
  return k;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() { return detail::splitmix64_next(state_); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to feed into log().
  double uniform01_open_below() { return 1.0 - uniform01(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the Marsaglia polar method (no trig, two values per
  // round; the spare is cached within the stream).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace rtpref
