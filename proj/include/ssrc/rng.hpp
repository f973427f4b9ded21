#ifndef SSRC_RNG_HPP
#define SSRC_RNG_HPP

#include <cstdint>
#include <random>

namespace ssrc {

// splitmix64, used to derive independent sub-seeds from a base seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  uint64_t integer(uint64_t n) {  // in [0, n)
    return std::uniform_int_distribution<uint64_t>(0, n - 1)(gen_);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ssrc

#endif
