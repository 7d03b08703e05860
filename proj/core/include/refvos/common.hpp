#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace refvos {

// All learnable math runs in double precision so analytic gradients can be
// validated against central finite differences at tight tolerances.
using real = double;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Counter-based PCG32 generator. Self-contained so that streams are
/// reproducible independent of the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform integer in [lo, hi], inclusive. Rejection-sampled, unbiased.
  int uniform_int(int lo, int hi);
  /// Uniform real in [0, 1).
  real uniform();
  /// Uniform real in [lo, hi).
  real uniform(real lo, real hi);
  /// Standard normal via Box-Muller (no cached spare, fixed draw count).
  real normal();
  /// Bernoulli draw.
  bool chance(real p);

  /// Derive an independent child generator; deterministic in (state, key).
  Rng split(std::uint64_t key) const;

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

}  // namespace refvos
