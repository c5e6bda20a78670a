#include "sindyae/stlsq.hpp"

#include <cmath>

namespace sindyae {

namespace {

struct ColumnFit {
  Vector coefficients;
  bool rank_deficient = false;
};

ColumnFit solve_active(const Matrix& theta, const Vector& target, const std::vector<int>& active) {
  ColumnFit fit;
  fit.coefficients = Vector::Zero(theta.cols());
  if (active.empty()) return fit;
  Eigen::MatrixXd sub(theta.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = theta.col(active[k]);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sub);
  const Vector sol = cod.solve(target);
  fit.rank_deficient = cod.rank() < static_cast<Eigen::Index>(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) fit.coefficients(active[k]) = sol(static_cast<Eigen::Index>(k));
  return fit;
}

}  // namespace

StlsqResult stlsq(const Matrix& theta, const Matrix& targets, double threshold, int max_iters) {
  if (theta.rows() != targets.rows())
    throw DimensionError("stlsq: theta and targets differ in sample count");
  if (!theta.allFinite() || !targets.allFinite())
    throw std::invalid_argument("stlsq: non-finite input");
  if (max_iters < 1) throw std::invalid_argument("stlsq: max_iters must be >= 1");

  const Eigen::Index p = theta.cols();
  const Eigen::Index d = targets.cols();
  StlsqResult result;
  result.xi = Matrix::Zero(p, d);
  result.active = Matrix::Zero(p, d);
  result.underdetermined = theta.rows() < p;
  result.residual_norms.assign(static_cast<std::size_t>(d), 0.0);

  for (Eigen::Index k = 0; k < d; ++k) {
    const Vector target = targets.col(k);
    std::vector<int> active(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) active[static_cast<std::size_t>(j)] = static_cast<int>(j);

    ColumnFit fit = solve_active(theta, target, active);
    result.rank_deficient |= fit.rank_deficient;
    int sweeps = 1;
    while (true) {
      std::vector<int> kept;
      for (int j : active)
        if (std::abs(fit.coefficients(j)) >= threshold) kept.push_back(j);
      if (kept.size() == active.size() || sweeps >= max_iters) {
        // Fixed point, or budget exhausted: apply the last threshold and stop.
        for (Eigen::Index j = 0; j < p; ++j)
          if (std::abs(fit.coefficients(j)) < threshold) fit.coefficients(j) = 0.0;
        break;
      }
      active = std::move(kept);
      fit = solve_active(theta, target, active);
      result.rank_deficient |= fit.rank_deficient;
      ++sweeps;
    }
    result.iterations = std::max(result.iterations, sweeps);
    result.xi.col(k) = fit.coefficients;
    for (Eigen::Index j = 0; j < p; ++j) result.active(j, k) = fit.coefficients(j) != 0.0 ? 1.0 : 0.0;
    result.residual_norms[static_cast<std::size_t>(k)] = (target - theta * fit.coefficients).norm();
  }
  return result;
}

}  // namespace sindyae
