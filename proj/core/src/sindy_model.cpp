#include "sindyae/sindy_model.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace sindyae {

SindyModel SindyModel::dense(const LibrarySpec& spec, const Matrix& xi) {
  SindyModel m{spec, xi, Matrix::Ones(xi.rows(), xi.cols())};
  m.validate();
  return m;
}

int SindyModel::active_terms() const {
  int count = 0;
  const Matrix active = masked();
  for (Eigen::Index i = 0; i < active.size(); ++i)
    if (active.data()[i] != 0.0) ++count;
  return count;
}

void SindyModel::validate() const {
  spec.validate();
  if (xi.rows() != spec.term_count() || xi.cols() != spec.state_dim)
    throw DimensionError("SindyModel: xi must be " + std::to_string(spec.term_count()) + " x " +
                         std::to_string(spec.state_dim));
  if (mask.rows() != xi.rows() || mask.cols() != xi.cols())
    throw DimensionError("SindyModel: mask shape differs from xi");
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double v = mask.data()[i];
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("SindyModel: mask entries must be 0 or 1");
  }
}

std::vector<std::string> render_equations(const SindyModel& model, int precision) {
  const auto terms = enumerate_terms(model.spec);
  const Matrix coeffs = model.masked();
  std::vector<std::string> out;
  for (Eigen::Index k = 0; k < coeffs.cols(); ++k) {
    std::ostringstream eq;
    eq << (model.spec.model_order == 1 ? "d" : "d2") << "z" << (k + 1)
       << (model.spec.model_order == 1 ? "/dt" : "/dt2") << " =";
    bool first = true;
    for (Eigen::Index j = 0; j < coeffs.rows(); ++j) {
      const double c = coeffs(j, k);
      if (c == 0.0) continue;
      const auto& name = terms[static_cast<std::size_t>(j)].name;
      eq << (first ? (c < 0 ? " -" : " ") : (c < 0 ? " - " : " + "));
      eq << std::fixed << std::setprecision(precision) << std::abs(c);
      if (name != "1") eq << " " << name;
      first = false;
    }
    if (first) eq << " 0";
    out.push_back(eq.str());
  }
  return out;
}

}  // namespace sindyae
