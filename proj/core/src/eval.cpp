#include "sindyae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace sindyae {

namespace {

double centered_sum_of_squares(const Matrix& truth) {
  const RowVector mean = truth.colwise().mean();
  return (truth.rowwise() - mean).squaredNorm();
}

}  // namespace

double fuv(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw DimensionError("fuv: truth and prediction shapes differ");
  const double denom = centered_sum_of_squares(truth);
  if (!(denom > 0.0)) throw std::domain_error("fuv: truth has zero variance");
  return (truth - pred).squaredNorm() / denom;
}

SimulationResult simulate_model(const SindyModel& model, const RowVector& z0,
                                const std::optional<RowVector>& dz0, double t_end, double dt) {
  model.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_model: dt must be positive");
  const int d = model.spec.state_dim;
  if (z0.size() != d) throw DimensionError("simulate_model: z0 has wrong dimension");
  const bool second = model.spec.model_order == 2;
  if (second && (!dz0 || dz0->size() != d))
    throw DimensionError("simulate_model: second-order model needs dz0 of dimension d");

  const Library library(model.spec);
  const Matrix coeffs = model.masked();
  Vector state(second ? 2 * d : d);
  state.head(d) = z0.transpose();
  if (second) state.tail(d) = dz0->transpose();

  const RhsFunction rhs = [&](double, const Vector& s, Vector& ds) {
    ds.resize(s.size());
    const Matrix inputs = s.transpose();
    const RowVector accel = library.evaluate(inputs) * coeffs;
    if (second) {
      ds.head(d) = s.tail(d);
      ds.tail(d) = accel.transpose();
    } else {
      ds = accel.transpose();
    }
  };

  SimulationResult result;
  try {
    result.trajectory = rk4_integrate(rhs, state, 0.0, t_end, dt);
  } catch (const NonFiniteStateError& e) {
    result.trajectory = e.partial();
    result.diverged = true;
  }
  return result;
}

std::set<std::pair<int, std::string>> sparsity_pattern(const SindyModel& model) {
  model.validate();
  const auto terms = enumerate_terms(model.spec);
  const Matrix coeffs = model.masked();
  std::set<std::pair<int, std::string>> out;
  for (Eigen::Index k = 0; k < coeffs.cols(); ++k)
    for (Eigen::Index j = 0; j < coeffs.rows(); ++j)
      if (coeffs(j, k) != 0.0) out.emplace(static_cast<int>(k), terms[static_cast<std::size_t>(j)].name);
  return out;
}

namespace {

struct LorenzTerms {
  int one = -1, z1 = -1, z2 = -1, z3 = -1, z1z3 = -1, z1z2 = -1;
};

std::optional<LorenzTerms> lorenz_terms(const SindyModel& model) {
  const auto& spec = model.spec;
  if (spec.state_dim != 3 || spec.model_order != 1 || spec.poly_order < 2) return std::nullopt;
  std::map<std::string, int> index;
  const auto terms = enumerate_terms(spec);
  for (std::size_t j = 0; j < terms.size(); ++j) index[terms[j].name] = static_cast<int>(j);
  return LorenzTerms{index.at("1"), index.at("z1"), index.at("z2"), index.at("z3"),
                     index.at("z1*z3"), index.at("z1*z2")};
}

bool within_template(const SindyModel& model, const LorenzTerms& t) {
  const std::vector<std::vector<int>> allowed = {
      {t.z1, t.z2}, {t.z1, t.z2, t.z1z3}, {t.one, t.z3, t.z1z2}};
  const Matrix c = model.masked();
  for (Eigen::Index k = 0; k < 3; ++k)
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      if (c(j, k) == 0.0) continue;
      const auto& ok = allowed[static_cast<std::size_t>(k)];
      if (std::find(ok.begin(), ok.end(), static_cast<int>(j)) == ok.end()) return false;
    }
  return true;
}

}  // namespace

SindyModel apply_lorenz_substitution(const SindyModel& model, double a1, double a2, double a3,
                                     double b3) {
  model.validate();
  const auto t = lorenz_terms(model);
  if (!t || !within_template(model, *t))
    throw std::invalid_argument("apply_lorenz_substitution: model outside the Lorenz template");
  const Matrix c = model.masked();
  Matrix w = Matrix::Zero(c.rows(), c.cols());
  // eq1: a1 w1' = c11 a1 w1 + c12 a2 w2
  w(t->z1, 0) = c(t->z1, 0);
  w(t->z2, 0) = c(t->z2, 0) * a2 / a1;
  // eq2: a2 w2' = c21 a1 w1 + c22 a2 w2 + c213 a1 w1 (a3 w3 + b3)
  w(t->z1, 1) = (c(t->z1, 1) + c(t->z1z3, 1) * b3) * a1 / a2;
  w(t->z2, 1) = c(t->z2, 1);
  w(t->z1z3, 1) = c(t->z1z3, 1) * a1 * a3 / a2;
  // eq3: a3 w3' = c30 + c33 (a3 w3 + b3) + c312 a1 a2 w1 w2
  w(t->one, 2) = (c(t->one, 2) + c(t->z3, 2) * b3) / a3;
  w(t->z3, 2) = c(t->z3, 2);
  w(t->z1z2, 2) = c(t->z1z2, 2) * a1 * a2 / a3;
  return SindyModel::dense(model.spec, w);
}

std::optional<LorenzTransform> lorenz_affine_transform(const SindyModel& model) {
  model.validate();
  const auto t = lorenz_terms(model);
  if (!t || !within_template(model, *t)) return std::nullopt;
  const Matrix c = model.masked();
  const double c11 = c(t->z1, 0);
  const double c12 = c(t->z2, 0);
  const double c213 = c(t->z1z3, 1);
  const double c30 = c(t->one, 2);
  const double c33 = c(t->z3, 2);
  const double c312 = c(t->z1z2, 2);
  if (c11 == 0.0 || c12 == 0.0 || c213 == 0.0 || c312 == 0.0) return std::nullopt;
  if (c30 != 0.0 && c33 == 0.0) return std::nullopt;

  LorenzTransform out;
  out.alpha1 = 1.0;
  out.alpha2 = -c11 / c12;
  out.beta3 = c30 == 0.0 ? 0.0 : -c30 / c33;
  const double ratio = -c312 / c213;
  if (!(ratio > 0.0)) return std::nullopt;
  out.alpha3 = std::abs(out.alpha2) * std::sqrt(ratio);
  out.transformed = apply_lorenz_substitution(model, out.alpha1, out.alpha2, out.alpha3, out.beta3);
  // The constraints hold exactly by construction; remove rounding residue.
  out.transformed.xi(t->z2, 0) = -out.transformed.xi(t->z1, 0);
  out.transformed.xi(t->one, 2) = 0.0;
  return out;
}

std::size_t select_model(const std::vector<ModelCandidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_model: no candidates");
  int fewest = std::numeric_limits<int>::max();
  for (const auto& c : candidates) fewest = std::min(fewest, c.active_terms);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.active_terms != fewest) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = candidates[*best];
    // NaN scores never win against a finite one.
    const bool better = (std::isnan(b.validation_fuv) && !std::isnan(c.validation_fuv)) ||
                        c.validation_fuv < b.validation_fuv ||
                        (c.validation_fuv == b.validation_fuv && c.seed < b.seed);
    if (better) best = i;
  }
  return *best;
}

EvalReport evaluate_model(const NetworkParams* network, const SindyModel& model,
                          const Dataset& data, bool with_simulation, Eigen::Index chunk_rows) {
  model.validate();
  data.validate();
  const int order = model.spec.model_order;
  const int d = model.spec.state_dim;
  if (order == 2 && !data.ddx) throw std::invalid_argument("evaluate_model: dataset lacks ddX");
  const Library library(model.spec);
  const Eigen::Index m = data.x.rows();
  const Matrix& input_truth = order == 1 ? data.dx : *data.ddx;

  EvalReport report;
  report.model_order = order;
  Matrix latent(m, d);
  Matrix dlatent(m, d);
  Matrix latent_target(m, d);
  Matrix latent_pred(m, d);

  if (network != nullptr) {
    double x_err = 0.0;
    double dx_err = 0.0;
    const Matrix mask = model.mask;
    for (Eigen::Index start = 0; start < m; start += chunk_rows) {
      const Eigen::Index rows = std::min(chunk_rows, m - start);
      const Matrix x = data.x.middleRows(start, rows);
      const Matrix dx = data.dx.middleRows(start, rows);
      Matrix ddx;
      if (data.ddx) ddx = data.ddx->middleRows(start, rows);
      const BatchView batch{x, dx, data.ddx ? &ddx : nullptr};
      const auto f = forward_model(batch, *network, model.xi, mask, library);
      x_err += (x - f.decoder.output.value).squaredNorm();
      dx_err += (f.input_target - f.input_prediction).squaredNorm();
      latent.middleRows(start, rows) = f.encoder.output.value;
      dlatent.middleRows(start, rows) = f.encoder.output.d1;
      latent_target.middleRows(start, rows) = f.latent_target;
      latent_pred.middleRows(start, rows) = f.latent_prediction;
    }
    const double x_var = centered_sum_of_squares(data.x);
    const double dx_var = centered_sum_of_squares(input_truth);
    if (!(x_var > 0.0) || !(dx_var > 0.0)) throw std::domain_error("evaluate_model: zero variance data");
    report.fuv_x = x_err / x_var;
    report.fuv_dx = dx_err / dx_var;
    report.fuv_dz = fuv(latent_target, latent_pred);
  } else {
    if (data.x.cols() != d) throw DimensionError("evaluate_model: latent data width differs from d");
    latent = data.x;
    dlatent = data.dx;
    Matrix inputs = data.x;
    if (order == 2) {
      inputs.resize(m, 2 * d);
      inputs << data.x, data.dx;
    }
    latent_target = input_truth;
    latent_pred = library.evaluate(inputs) * model.masked();
    report.fuv_x = 0.0;
    report.fuv_dz = fuv(latent_target, latent_pred);
    report.fuv_dx = report.fuv_dz;
  }

  report.active_terms = model.active_terms();
  const auto terms = enumerate_terms(model.spec);
  const Matrix coeffs = model.masked();
  for (Eigen::Index k = 0; k < coeffs.cols(); ++k) {
    std::vector<EquationTerm> eq;
    for (Eigen::Index j = 0; j < coeffs.rows(); ++j)
      if (coeffs(j, k) != 0.0) eq.push_back({terms[static_cast<std::size_t>(j)].name, coeffs(j, k)});
    report.equations.push_back(std::move(eq));
  }
  report.rendered = render_equations(model);

  if (with_simulation && !data.trajectories.empty() && data.trajectories.front().length > 1) {
    const auto span = data.trajectories.front();
    const auto start = static_cast<Eigen::Index>(span.start);
    const auto len = static_cast<Eigen::Index>(span.length);
    const Matrix reference = latent.middleRows(start, len);
    const double scale = std::sqrt(reference.squaredNorm() / static_cast<double>(len));
    std::optional<RowVector> dz0;
    if (order == 2) dz0 = dlatent.row(start);
    const auto sim = simulate_model(model, latent.row(start), dz0,
                                    static_cast<double>(len - 1) * data.dt, data.dt);
    const auto& states = sim.trajectory.states;
    for (Eigen::Index i = 0; i < len; ++i) {
      if (i >= states.rows()) {
        report.divergence_time = static_cast<double>(i) * data.dt;
        break;
      }
      const double err = (states.row(i).head(d) - reference.row(i)).norm();
      if (scale > 0.0 && err / scale > 0.1) {
        report.divergence_time = static_cast<double>(i) * data.dt;
        break;
      }
    }
  }
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["model_order"] = report.model_order;
  const std::string suffix = report.model_order == 1 ? "dx" : "ddx";
  const std::string zsuffix = report.model_order == 1 ? "dz" : "ddz";
  j["fuv_x"] = report.fuv_x;
  j["fuv_" + suffix] = report.fuv_dx;
  j["fuv_" + zsuffix] = report.fuv_dz;
  j["active_terms"] = report.active_terms;
  nlohmann::json eqs = nlohmann::json::array();
  for (const auto& eq : report.equations) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : eq) terms.push_back({{"term", t.term}, {"coefficient", t.coefficient}});
    eqs.push_back(terms);
  }
  j["equations"] = eqs;
  j["rendered"] = report.rendered;
  j["divergence_time"] = report.divergence_time ? nlohmann::json(*report.divergence_time) : nlohmann::json();
  return j;
}

}  // namespace sindyae
