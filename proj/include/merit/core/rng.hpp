#pragma once
// Seeded RNG wrapper. All stochastic components take an explicit seed and
// derive their streams from it, so a run is reproducible end to end.

#include <cstdint>
#include <random>

namespace merit {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(eng_);
  }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {  // inclusive
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }
  // Independent child stream; `salt` keeps sibling components decorrelated.
  Rng fork(std::uint64_t salt) {
    std::uint64_t s = eng_();
    return Rng(s ^ (salt * 0x9e3779b97f4a7c15ULL));
  }
  template <class It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, eng_);
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace merit
