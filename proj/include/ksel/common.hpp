#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ksel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// Bad data passed in by the caller (sizes, non-finite values, out-of-range).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (non-positive penalties, malformed grids, wrong kernel family).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure (factorization breakdown, degenerate leverage) that survived recovery.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Statistical procedure cannot run on the given sample (e.g. a cross-fitting
// fold without any unit of the required treatment/selection pattern).
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64 step; used to derive independent per-replication seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ksel
