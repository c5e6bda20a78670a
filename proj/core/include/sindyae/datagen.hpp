#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sindyae/core_math.hpp"

namespace sindyae {

struct TrajectorySpan {
  std::size_t start = 0;
  std::size_t length = 0;
};

/// Snapshot matrices with exact time derivatives. Rows are samples.
struct Dataset {
  Matrix x;
  Matrix dx;
  std::optional<Matrix> ddx;
  double dt = 0.0;
  std::vector<TrajectorySpan> trajectories;
  /// system, parameters, seed, split, preset
  nlohmann::json metadata = nlohmann::json::object();

  /// Ground-truth latent state (z, dz, ddz) when the generator knows it.
  /// Kept in memory only; never written to disk.
  std::optional<Matrix> latent;
  std::optional<Matrix> dlatent;
  std::optional<Matrix> ddlatent;

  std::size_t samples() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
  int derivative_order() const { return ddx ? 2 : 1; }
  void validate() const;
  Dataset rows(const std::vector<std::size_t>& indices) const;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
  nlohmann::json manifest = nlohmann::json::object();
};

// ---------------------------------------------------------------------------
// Lorenz system lifted to 128 dimensions through Legendre modes
// ---------------------------------------------------------------------------

struct LorenzOptions {
  int n_ic_train = 2048;
  int n_ic_val = 20;
  int n_ic_test = 100;
  double t_end = 5.0;
  double dt = 0.02;
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  int n_grid = 128;
  // States are multiplied by this before lifting so that the cubic modes stay
  // O(1). The stored latent ground truth is unscaled.
  double latent_scale = 1.0 / 40.0;
  std::uint64_t seed = 0;
  std::string preset = "paper";
};

LorenzOptions lorenz_paper_preset(std::uint64_t seed);
LorenzOptions lorenz_desk_preset(std::uint64_t seed);

void lorenz_rhs(const Vector& z, Vector& dz, double sigma, double rho, double beta);

/// Lift latent states into snapshots: x = U g(z) with
/// g = (z1, z2, z3, z1^3, z2^3, z3^3) and U the six unit-norm Legendre modes.
/// Returns (X, dX) given (Z, dZ).
std::pair<Matrix, Matrix> lorenz_lift(const Matrix& z, const Matrix& dz, const Matrix& modes);

/// Integrate one Lorenz trajectory from z0 and return (Z, dZ) with
/// round(t_end / dt) samples starting at t = 0.
std::pair<Matrix, Matrix> lorenz_trajectory(const LorenzOptions& opt, const Vector& z0);

DatasetSplits generate_lorenz(const LorenzOptions& opt);

// ---------------------------------------------------------------------------
// Lambda-omega reaction-diffusion system
// ---------------------------------------------------------------------------

struct ReactionDiffusionOptions {
  int grid = 100;             // points per axis on the periodic domain [-L, L)
  double half_width = 10.0;   // L
  double t_end = 500.0;       // round(t_end / dt) snapshots starting at t = 0
  double dt = 0.05;
  int substeps = 1;           // RK4 steps per snapshot interval
  double d1 = 0.1;
  double d2 = 0.1;
  double beta = 1.0;
  double noise_std = 1e-6;
  double test_fraction = 0.1;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string preset = "paper";
};

ReactionDiffusionOptions reaction_diffusion_paper_preset(std::uint64_t seed);
ReactionDiffusionOptions reaction_diffusion_desk_preset(std::uint64_t seed);

class CflError : public std::invalid_argument {
 public:
  CflError(double dt, double suggested_dt);
  double suggested_dt() const { return suggested_; }

 private:
  double suggested_;
};

/// Method-of-lines solver: centered second-order Laplacian with periodic
/// boundaries, classic RK4 in time. State is (u, v) stacked as 2 * grid^2.
class ReactionDiffusionSolver {
 public:
  explicit ReactionDiffusionSolver(const ReactionDiffusionOptions& opt);

  int grid() const { return grid_; }
  double spacing() const { return h_; }
  /// Coordinate of grid index i along either axis.
  double coordinate(int i) const { return -half_width_ + h_ * i; }

  /// Largest stable dt for the diffusion part under RK4.
  double max_stable_dt() const;

  void rhs(const Vector& state, Vector& out) const;
  void step(Vector& state, double dt) const;

  /// Spiral initial condition u + iv = tanh(r e^{i(theta - r)}) split into
  /// real/imag parts as tanh(r cos(theta - r)), tanh(r sin(theta - r)).
  Vector spiral_initial_condition() const;
  Vector homogeneous_initial_condition(double amplitude, double phase) const;
  /// Gaussian localization mask exp(-0.1 (y1^2 + y2^2)), flattened.
  RowVector gaussian_mask() const;

 private:
  int grid_;
  double half_width_;
  double h_;
  double d1_, d2_, beta_;
};

/// Snapshots of the masked u-field and its exact time derivative.
struct ReactionDiffusionRun {
  Matrix x;
  Matrix dx;
  std::vector<double> times;
};

ReactionDiffusionRun simulate_reaction_diffusion(const ReactionDiffusionOptions& opt,
                                                 const Vector& initial_state);

DatasetSplits generate_reaction_diffusion(const ReactionDiffusionOptions& opt);

// ---------------------------------------------------------------------------
// Pendulum rendered as a synthetic video
// ---------------------------------------------------------------------------

struct PendulumOptions {
  int n_ic_train = 100;
  int n_ic_val = 10;
  int n_ic_test = 50;
  double t_end = 10.0;
  double dt = 0.02;
  int grid = 51;
  double extent = 1.5;  // image covers [-extent, extent]^2
  double energy_bound = 0.99;
  std::uint64_t seed = 0;
  std::string preset = "paper";
};

PendulumOptions pendulum_paper_preset(std::uint64_t seed);
PendulumOptions pendulum_desk_preset(std::uint64_t seed);

/// True when |dz0^2 / 2 - cos z0| <= bound.
bool pendulum_ic_accepted(double z0, double dz0, double bound = 0.99);

/// Image of the pendulum at angle z: exp(-20 ((y1 - cos(z - pi/2))^2 + (y2 - sin(z - pi/2))^2)),
/// flattened with y2 as the row index and y1 as the column index.
/// Also returns the first and second derivatives with respect to z.
struct PendulumFrame {
  RowVector x;
  RowVector dx_dz;
  RowVector d2x_dz2;
};
PendulumFrame render_pendulum(double z, int grid, double extent);

DatasetSplits generate_pendulum(const PendulumOptions& opt);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitSpec {
  std::size_t n_test = 0;   // taken from the end
  std::size_t n_val = 0;    // drawn at random from the remaining samples
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Last n_test samples form the test set, n_val are drawn without replacement
/// from the rest, and the remaining samples (in original order) form training.
SplitIndices split_indices(std::size_t n_samples, const SplitSpec& spec, std::uint64_t seed);

DatasetSplits split_and_package(const Dataset& raw, const SplitSpec& spec, std::uint64_t seed);

}  // namespace sindyae
