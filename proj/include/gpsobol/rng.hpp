#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace gpsobol {

using Rng = std::mt19937_64;

/// Derives an independent substream seed from a master seed. Used to give
/// each path realization / worker its own generator so results do not
/// depend on scheduling.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 over (master, index)
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline Eigen::VectorXd uniform01(Rng& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = ud(rng);
  return v;
}

}  // namespace gpsobol
