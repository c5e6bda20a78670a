#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sindyae/autoencoder.hpp"
#include "sindyae/datagen.hpp"
#include "sindyae/sindy_model.hpp"

namespace sindyae {

/// Fraction of unexplained variance:
/// sum (truth - pred)^2 / sum (truth - column_mean(truth))^2 over all entries.
/// Throws std::domain_error when the truth has zero variance.
double fuv(const Matrix& truth, const Matrix& pred);

struct SimulationResult {
  Trajectory trajectory;  // columns z (and dz for second-order models)
  bool diverged = false;  // integration stopped at a non-finite state
};

/// RK4 on the discovered dynamics. Second-order models integrate (z, dz).
SimulationResult simulate_model(const SindyModel& model, const RowVector& z0,
                                const std::optional<RowVector>& dz0, double t_end, double dt);

/// (equation index, term name) pairs of nonzero masked coefficients.
/// Equation indices are zero-based.
std::set<std::pair<int, std::string>> sparsity_pattern(const SindyModel& model);

struct LorenzTransform {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double alpha3 = 1.0;
  double beta3 = 0.0;
  SindyModel transformed;
};

/// Substitutes z1 = a1 w1, z2 = a2 w2, z3 = a3 w3 + b3 into a model whose
/// support lies within the Lorenz-like template
///   eq1 {z1, z2}, eq2 {z1, z2, z1*z3}, eq3 {1, z3, z1*z2}
/// and returns the coefficients in the w variables.
SindyModel apply_lorenz_substitution(const SindyModel& model, double a1, double a2, double a3,
                                     double b3);

/// Affine change of variables that puts a discovered model in Lorenz form:
/// alpha1 = 1, alpha2 makes the eq1 coefficients of w1 and w2 opposite, beta3
/// removes the eq3 constant, and alpha3 > 0 makes the w1*w3 coefficient in eq2
/// the negative of the w1*w2 coefficient in eq3. Returns nullopt when the
/// model is not third-order polynomial in three variables, its support leaves
/// the template, or a required term is missing.
std::optional<LorenzTransform> lorenz_affine_transform(const SindyModel& model);

struct ModelCandidate {
  int active_terms = 0;
  double validation_fuv = 0.0;
  std::uint64_t seed = 0;
};

/// Among candidates with the fewest active terms, the lowest validation FUV;
/// remaining ties go to the lowest seed.
std::size_t select_model(const std::vector<ModelCandidate>& candidates);

struct EquationTerm {
  std::string term;
  double coefficient = 0.0;
};

struct EvalReport {
  int model_order = 1;
  double fuv_x = 0.0;
  double fuv_dx = 0.0;  // dX for first order, ddX for second order
  double fuv_dz = 0.0;  // dZ for first order, ddZ for second order
  int active_terms = 0;
  std::vector<std::vector<EquationTerm>> equations;
  std::vector<std::string> rendered;
  std::optional<double> divergence_time;
};

/// Evaluates an autoencoder + SINDy model on a dataset, in chunks of
/// `chunk_rows` samples. `network` may be null for a pure SINDy model whose
/// data already lives in latent coordinates; then fuv_x = 0 and fuv_dx = fuv_dz.
EvalReport evaluate_model(const NetworkParams* network, const SindyModel& model,
                          const Dataset& data, bool with_simulation = true,
                          Eigen::Index chunk_rows = 2048);

nlohmann::json to_json(const EvalReport& report);

}  // namespace sindyae
