#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace posbias {

// splitmix64 finalizer (Steele, Lea, Flood). Bijective on 64-bit words.
inline uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent stream seed from a base seed plus a derivation
// path. Same path always yields the same seed; distinct paths decorrelate.
inline uint64_t derive_seed(uint64_t base,
                            std::initializer_list<uint64_t> path) {
  uint64_t h = mix64(base + 0x9e3779b97f4a7c15ULL);
  for (uint64_t p : path) {
    h = mix64(h ^ mix64(p + 0x9e3779b97f4a7c15ULL));
  }
  return h;
}

// Stream purposes. Splitting per purpose keeps corpus, ranker and click
// randomness decoupled: changing sweeps never perturbs the corpus draw.
enum StreamPurpose : uint64_t {
  kCorpusStream = 1,
  kRankerStream = 2,
  kClickStream = 3,
  kQuerySampleStream = 4,
  kExperimentStream = 5,
};

// Small counter-based generator: each next_u64() is the splitmix64 step.
// Cheap enough to create one per log record, which is what makes the
// simulator's output independent of execution order.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in (0, 1], safe to pass to log()
  double next_unit_positive() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; consumes two words per call
  double next_normal() {
    constexpr double kTwoPi = 6.283185307179586476925287;
    double u1 = next_unit_positive();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // uniform in [0, n) via multiply-shift; bias is O(n / 2^64)
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  uint64_t state_;
};

}  // namespace posbias
