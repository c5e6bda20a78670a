#include "sindyae/core_math.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace sindyae {

void retain_large_allocations() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);  // glibc maximum on 64-bit targets
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

std::uint64_t RngStream::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("RngStream::below: bound must be positive");
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
  std::uint64_t draw = next_u64();
  while (draw >= limit) draw = next_u64();
  return draw % bound;
}

RngStream seeded_rng(std::uint64_t seed) { return RngStream(seed); }

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  return splitmix64(x);
}

void shuffle_indices(std::vector<std::size_t>& indices, RngStream& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(indices[i - 1], indices[j]);
  }
}

Matrix xavier_init(std::size_t rows, std::size_t cols, RngStream& rng) {
  if (rows == 0 || cols == 0) throw DimensionError("xavier_init: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
  return w;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    std::ostringstream msg;
    msg << "adam_step: shape mismatch (params " << params.size() << ", grads " << grads.size()
        << ", moments " << state.first_moment.size() << "/" << state.second_moment.size() << ")";
    throw DimensionError(msg.str());
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double m_corr = 1.0 - std::pow(state.beta1, t);
  const double v_corr = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    params[i] -= learning_rate * (m / m_corr) / (std::sqrt(v / v_corr) + state.epsilon);
  }
}

NonFiniteStateError::NonFiniteStateError(std::size_t step, Trajectory partial)
    : std::runtime_error("rk4_integrate: non-finite state at step " + std::to_string(step)),
      step_(step),
      partial_(std::move(partial)) {}

void rk4_step(const RhsFunction& rhs, double t, double dt, Vector& state) {
  const Eigen::Index n = state.size();
  Vector k1(n), k2(n), k3(n), k4(n);
  rhs(t, state, k1);
  rhs(t + 0.5 * dt, state + 0.5 * dt * k1, k2);
  rhs(t + 0.5 * dt, state + 0.5 * dt * k2, k3);
  rhs(t + dt, state + dt * k3, k4);
  state += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory rk4_integrate(const RhsFunction& rhs, const Vector& state0, double t0, double t_end,
                         double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_integrate: dt must be positive");
  const double span = (t_end - t0) / dt;
  const double rounded = std::round(span);
  if (span < -1e-9 || std::abs(span - rounded) > 1e-6 * std::max(1.0, std::abs(span)))
    throw std::invalid_argument("rk4_integrate: (t_end - t0) / dt must be a non-negative integer");
  const auto steps = static_cast<std::size_t>(rounded);

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.resize(static_cast<Eigen::Index>(steps + 1), state0.size());
  Vector state = state0;
  traj.times.push_back(t0);
  traj.states.row(0) = state.transpose();
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = t0 + static_cast<double>(k - 1) * dt;
    rk4_step(rhs, t, dt, state);
    if (!state.allFinite()) {
      Trajectory partial;
      partial.times = traj.times;
      partial.states = traj.states.topRows(static_cast<Eigen::Index>(k));
      throw NonFiniteStateError(k, std::move(partial));
    }
    traj.times.push_back(t0 + static_cast<double>(k) * dt);
    traj.states.row(static_cast<Eigen::Index>(k)) = state.transpose();
  }
  return traj;
}

Matrix legendre_modes(std::size_t n_grid, std::size_t n_modes) {
  if (n_modes > n_grid) throw DimensionError("legendre_modes: n_modes exceeds n_grid");
  if (n_grid == 0) throw DimensionError("legendre_modes: n_grid must be positive");
  Matrix modes(n_grid, n_modes);
  for (std::size_t i = 0; i < n_grid; ++i) {
    // Cell centers. Including the endpoints would put O(1/n) error into the
    // discrete orthogonality of the modes.
    const double x = -1.0 + (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n_grid);
    double p_prev = 1.0;
    double p = x;
    for (std::size_t k = 0; k < n_modes; ++k) {
      double value = 0.0;
      if (k == 0) {
        value = 1.0;
      } else if (k == 1) {
        value = x;
      } else {
        // (k) P_k = (2k - 1) x P_{k-1} - (k - 1) P_{k-2}
        const double kk = static_cast<double>(k);
        const double next = ((2.0 * kk - 1.0) * x * p - (kk - 1.0) * p_prev) / kk;
        p_prev = p;
        p = next;
        value = next;
      }
      modes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = value;
    }
  }
  for (Eigen::Index k = 0; k < modes.cols(); ++k) modes.col(k).normalize();
  return modes;
}

}  // namespace sindyae
