#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdlib>
#include <string>

#include "kprune/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kprune {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Inner product on the space of observables. Only the empirical L2 product
/// over the sampled states is provided; the per-sample weight is folded into
/// stored evaluation matrices as 1/sqrt(N), so downstream kernels use plain
/// Euclidean products throughout.
struct InnerProductSpec {
  enum class Kind { EmpiricalL2 };

  Kind kind = Kind::EmpiricalL2;
  double weight = 1.0;

  static InnerProductSpec empirical_l2(Index n_samples) {
    if (n_samples <= 0) throw InvalidInputError("empirical_l2: need at least one sample");
    return InnerProductSpec{Kind::EmpiricalL2, 1.0 / static_cast<double>(n_samples)};
  }

  double eval_scale() const { return std::sqrt(weight); }
};

namespace detail {

/// SplitMix64 mix step; used to derive independent stream seeds (e.g. one per
/// trajectory) from a user seed so that parallel generation is deterministic.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

}  // namespace detail

/// Applies the KOOPMAN_PRUNE_THREADS cap if the variable is set; returns the
/// resolved thread count. Call once at process start (CLI and test mains do).
inline int configure_threads_from_env() {
  int n = 0;
#ifdef _OPENMP
  n = omp_get_max_threads();
#endif
  if (const char* cap = std::getenv("KOOPMAN_PRUNE_THREADS")) {
    const int requested = std::atoi(cap);
    if (requested >= 1) {
      n = requested;
#ifdef _OPENMP
      omp_set_num_threads(requested);
#endif
      Eigen::setNbThreads(requested);
    }
  }
  return n > 0 ? n : 1;
}

}  // namespace kprune
