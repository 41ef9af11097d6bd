#include "cyclevib/ndmath/rng.hpp"

namespace cyclevib::nd {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, Stream stream)
    : engine_(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream))) {}

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal() { return normal_(engine_); }

Tensor Rng::normal(Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = normal_(engine_);
  return t;
}

Tensor Rng::uniform(Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(engine_);
  return t;
}

}  // namespace cyclevib::nd
