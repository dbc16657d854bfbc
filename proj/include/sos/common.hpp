#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sos {

inline constexpr const char* kToolVersion = "sos-toolkit 1.0.0";

// File could not be opened or read at all.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// File was readable but its content is not a valid instance of the format.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structured input (CSV, config, manifest) violates its schema.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

uint64_t splitmix64(uint64_t x);

// Order-independent derivation of a child seed from a parent seed and an index.
uint64_t mix_seed(uint64_t seed, uint64_t v);

// Deterministic RNG used for every random draw in the toolkit. SplitMix64
// supplies the bits; the distributions are implemented here so that a given
// seed produces the same stream on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed)) {}

  uint64_t next_u64();
  // in [0,1)
  double uniform01();
  double uniform(double lo, double hi);
  // in [lo, hi] inclusive
  int64_t uniform_int(int64_t lo, int64_t hi);
  bool bernoulli(double p);
  // standard normal via Box-Muller; consumes two uniforms per pair
  double normal();

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sos
