#ifndef PMNET_RANDOM_HPP_
#define PMNET_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace pmnet {

// Random streams with platform-independent draws: only the raw 64-bit engine
// output is used, never the library distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x706d6e65u};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform on {0, ..., n-1}; n > 0.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// Independent stream identifiers derived from one seed.
enum class Stream : std::uint64_t { init = 1, shuffle = 2, dropout = 3, corpus = 4, vocabulary = 5 };

inline Rng make_rng(std::uint64_t seed, Stream s) { return Rng(seed, static_cast<std::uint64_t>(s)); }

}  // namespace pmnet

#endif  // PMNET_RANDOM_HPP_
