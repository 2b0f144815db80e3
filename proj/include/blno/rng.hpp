#ifndef BLNO_RNG_HPP_
#define BLNO_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace blno {

// Splittable 64-bit generator built on the SplitMix64 finalizer.
//
// Stream map (frozen): the initial counter for (seed, stream) is
//   mix(mix(seed) ^ mix(stream * 0x9e3779b97f4a7c15 + 0x6a09e667f3bcc909))
// and each draw advances the counter by the golden-ratio increment before
// applying the finalizer. Equal (seed, stream) pairs therefore reproduce
// the same sequence on any platform; distinct stream ids give statistically
// independent sequences. Normal variates use Box-Muller with the second
// variate cached.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : counter_(mix(mix(seed) ^
                     mix(stream * 0x9e3779b97f4a7c15ULL +
                         0x6a09e667f3bcc909ULL))),
        seed_(seed),
        stream_(stream) {}

  // Independent sub-stream; sub-stream ids are hashed together with this
  // generator's own stream id, so nested splits stay collision-free.
  Rng substream(std::uint64_t id) const {
    return Rng(seed_, mix(stream_ + 1) ^ (id + 1));
  }

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix(counter_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1.
  int uniform_int(int n) {
    const int k = static_cast<int>(uniform() * n);
    return k < n ? k : n - 1;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t counter_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace blno

#endif  // BLNO_RNG_HPP_
