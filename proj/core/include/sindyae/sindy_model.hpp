#pragma once

#include <string>
#include <vector>

#include "sindyae/core_math.hpp"
#include "sindyae/library.hpp"

namespace sindyae {

/// Sparse dynamics in latent coordinates: d^k z/dt^k = Theta(inputs) (mask o xi),
/// with k the library's model order.
struct SindyModel {
  LibrarySpec spec;
  Matrix xi;    // p x d
  Matrix mask;  // p x d of 0/1

  static SindyModel dense(const LibrarySpec& spec, const Matrix& xi);

  Matrix masked() const { return mask.cwiseProduct(xi); }
  int active_terms() const;
  void validate() const;
};

/// Human-readable equations, one per latent variable, e.g.
/// "dz1/dt = -10.000 z1 + 10.000 z2". Second-order models print d2z1/dt2.
std::vector<std::string> render_equations(const SindyModel& model, int precision = 3);

}  // namespace sindyae
