#pragma once

#include <vector>

#include "sindyae/core_math.hpp"

namespace sindyae {

struct StlsqResult {
  Matrix xi;                            // p x d, inactive entries exactly 0
  Matrix active;                        // p x d of 0/1
  std::vector<double> residual_norms;   // ||dX_k - Theta xi_k|| per equation
  int iterations = 0;
  bool rank_deficient = false;          // some active submatrix lost rank
  bool underdetermined = false;         // fewer samples than library terms
};

/// Sequentially thresholded least squares, solved independently per column of
/// `targets`. Each sweep refits the active columns with a complete orthogonal
/// decomposition (minimum-norm when rank deficient) and zeroes coefficients with
/// magnitude below `threshold`. Stops at a fixed point or after max_iters sweeps.
StlsqResult stlsq(const Matrix& theta, const Matrix& targets, double threshold, int max_iters = 10);

}  // namespace sindyae
