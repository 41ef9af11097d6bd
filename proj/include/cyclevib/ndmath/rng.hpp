#pragma once

#include <cstdint>
#include <random>

#include "cyclevib/ndmath/tensor.hpp"

namespace cyclevib::nd {

/// Independent substreams derived from one run seed. Each consumer draws
/// from its own stream so changing one (e.g. more latent samples) leaves
/// the others reproducible.
enum class Stream : std::uint64_t {
  kInit = 1,
  kNoise = 2,
  kLatent = 3,
  kShuffle = 4,
  kData = 5,
  kLift = 6,
  kEval = 7,
};

std::uint64_t splitmix64(std::uint64_t x);

class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream);

  double uniform(double lo, double hi);
  double normal();
  std::uint64_t next_u64() { return engine_(); }

  Tensor normal(Shape shape);
  Tensor uniform(Shape shape, double lo, double hi);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace cyclevib::nd
