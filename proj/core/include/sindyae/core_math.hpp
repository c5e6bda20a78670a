#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sindyae {

/// Dense row-major matrix of 64-bit floats. Samples are rows throughout the
/// library (X is m x n, Theta(Z) is m x p, Xi is p x d).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// True when every entry of `m` is finite.
bool all_finite(const Matrix& m);

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training allocates the same multi-megabyte batch buffers every step, and
/// with glibc's defaults each one is a fresh mmap that page-faults on first
/// touch. Process-wide, so only executables should call it. No-op elsewhere.
void retain_large_allocations();

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// xoshiro256** seeded through splitmix64.
///
/// The stream is fully determined by the 64-bit seed: the four state words are
/// the first four outputs of splitmix64(seed). Uniform doubles take the top 53
/// bits of a draw, normals use the Box-Muller transform with both outputs
/// consumed in order. Nothing here depends on the standard library's
/// distribution objects, so draws are identical across compilers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer on [0, bound). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

RngStream seeded_rng(std::uint64_t seed);

/// Child seed for parallel work item `index`: splitmix64 of
/// (seed + (index + 1) * 0x9E3779B97F4A7C15).
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

/// In-place Fisher-Yates shuffle driven by `rng`.
void shuffle_indices(std::vector<std::size_t>& indices, RngStream& rng);

// ---------------------------------------------------------------------------
// Initialization and optimization
// ---------------------------------------------------------------------------

/// Glorot/Xavier uniform initialization: entries drawn i.i.d. from
/// U[-sqrt(6/(rows+cols)), sqrt(6/(rows+cols))], filled in row-major order.
Matrix xavier_init(std::size_t rows, std::size_t cols, RngStream& rng);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t size)
      : first_moment(size, 0.0), second_moment(size, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate);

// ---------------------------------------------------------------------------
// Time integration
// ---------------------------------------------------------------------------

using RhsFunction = std::function<void(double t, const Vector& state, Vector& derivative)>;

struct Trajectory {
  std::vector<double> times;
  Matrix states;  // (steps + 1) x dim, first row is the initial state
};

class NonFiniteStateError : public std::runtime_error {
 public:
  NonFiniteStateError(std::size_t step, Trajectory partial);
  std::size_t step() const { return step_; }
  const Trajectory& partial() const { return partial_; }

 private:
  std::size_t step_;
  Trajectory partial_;
};

/// Advance `state` by one classic RK4 step.
void rk4_step(const RhsFunction& rhs, double t, double dt, Vector& state);

/// Fixed-step classic RK4 from t0 to t_end. Throws NonFiniteStateError carrying
/// the failing step index and the trajectory up to (excluding) that step.
Trajectory rk4_integrate(const RhsFunction& rhs, const Vector& state0, double t0, double t_end,
                         double dt);

// ---------------------------------------------------------------------------
// Spatial modes
// ---------------------------------------------------------------------------

/// Legendre polynomials P_0..P_{n_modes-1} sampled at the n_grid cell centers
/// -1 + (2i + 1) / n_grid of [-1, 1]; each column scaled to unit Euclidean norm.
Matrix legendre_modes(std::size_t n_grid, std::size_t n_modes);

}  // namespace sindyae
