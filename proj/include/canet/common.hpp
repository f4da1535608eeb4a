#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace canet {

// Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
// ContractViolation and failed checks -> 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Seeded RNG with a portable uniform: doubles are built from raw mt19937_64
// draws so results do not depend on libstdc++'s distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed), seed_(seed) {}

  uint64_t next() { return gen_(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n)
  uint64_t below(uint64_t n) {
    if (n == 0) throw ContractViolation("Rng::below(0)");
    uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t x;
    do { x = gen_(); } while (x >= limit);
    return x % n;
  }

  // Independent child stream; stable under scheduling, used for per-graph
  // and per-fold streams so parallel runs match serial ones bitwise.
  Rng derive(uint64_t salt) const {
    uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL + salt);
    x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27; x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return Rng(x);
  }

 private:
  std::mt19937_64 gen_;
  uint64_t seed_;
};

}  // namespace canet
