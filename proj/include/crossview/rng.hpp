#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace crossview {

// Deterministic random source. All distribution math is done here rather
// than through std:: distributions so that sequences are reproducible for a
// given seed independent of the standard library implementation, and so the
// full state round-trips through checkpoints as a plain string.
class Rng {
 public:
  Rng() : engine_(0x9e3779b97f4a7c15ull) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  bool coin() { return (next_u64() & 1ull) != 0; }

  // Box-Muller without cached spare, so the generator carries no hidden state.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derive an independent stream, e.g. one per fabricated image pair.
  Rng fork(std::uint64_t salt) {
    std::uint64_t s = next_u64() ^ (salt * 0x2545f4914f6cdd1dull + 0x9e3779b97f4a7c15ull);
    return Rng(s);
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (!is) throw std::runtime_error("Rng: malformed serialized state");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crossview
