#include "sindyae/library.hpp"

#include <cmath>
#include <sstream>

namespace sindyae {

namespace {

long long binomial(int n, int k) {
  long long result = 1;
  for (int i = 1; i <= k; ++i) result = result * (n - k + i) / i;
  return result;
}

// Exponent vectors of total degree `degree` over `vars` variables, with the
// first variable's exponent descending fastest in significance.
void monomials_of_degree(int vars, int degree, int position, std::vector<int>& current,
                         std::vector<std::vector<int>>& out) {
  if (position == vars - 1) {
    current[position] = degree;
    out.push_back(current);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    current[position] = e;
    monomials_of_degree(vars, degree - e, position + 1, current, out);
  }
  current[position] = 0;
}

std::string monomial_name(const LibrarySpec& spec, const std::vector<int>& exponents) {
  std::string name;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    if (exponents[k] == 0) continue;
    if (!name.empty()) name += "*";
    name += variable_name(spec, static_cast<int>(k));
    if (exponents[k] > 1) name += "^" + std::to_string(exponents[k]);
  }
  return name.empty() ? "1" : name;
}

double integer_power(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

}  // namespace

int LibrarySpec::term_count() const {
  const int v = variable_count();
  return static_cast<int>(binomial(v + poly_order, poly_order)) + (include_sine ? v : 0);
}

void LibrarySpec::validate() const {
  std::ostringstream msg;
  if (state_dim < 1) msg << "state_dim must be >= 1; ";
  if (poly_order < 0) msg << "poly_order must be >= 0; ";
  if (model_order != 1 && model_order != 2) msg << "model_order must be 1 or 2; ";
  if (!msg.str().empty()) throw std::invalid_argument("LibrarySpec: " + msg.str());
}

std::string variable_name(const LibrarySpec& spec, int index) {
  if (index < spec.state_dim) return "z" + std::to_string(index + 1);
  return "dz" + std::to_string(index - spec.state_dim + 1);
}

std::vector<TermDescriptor> enumerate_terms(const LibrarySpec& spec) {
  spec.validate();
  const int vars = spec.variable_count();
  std::vector<TermDescriptor> terms;
  terms.reserve(static_cast<std::size_t>(spec.term_count()));

  TermDescriptor constant;
  constant.kind = TermKind::constant;
  constant.exponents.assign(static_cast<std::size_t>(vars), 0);
  constant.name = "1";
  terms.push_back(constant);

  for (int degree = 1; degree <= spec.poly_order; ++degree) {
    std::vector<std::vector<int>> exps;
    std::vector<int> current(static_cast<std::size_t>(vars), 0);
    monomials_of_degree(vars, degree, 0, current, exps);
    for (auto& e : exps) {
      TermDescriptor term;
      term.kind = TermKind::monomial;
      term.name = monomial_name(spec, e);
      term.exponents = std::move(e);
      terms.push_back(std::move(term));
    }
  }
  if (spec.include_sine) {
    for (int k = 0; k < vars; ++k) {
      TermDescriptor term;
      term.kind = TermKind::sine;
      term.variable = k;
      term.name = "sin(" + variable_name(spec, k) + ")";
      terms.push_back(std::move(term));
    }
  }
  return terms;
}

Library::Library(LibrarySpec spec) : spec_(spec), terms_(enumerate_terms(spec)) {}

std::vector<std::string> Library::names() const {
  std::vector<std::string> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back(t.name);
  return out;
}

void Library::check_width(Eigen::Index cols) const {
  if (cols != spec_.variable_count()) {
    std::ostringstream msg;
    msg << "library expects " << spec_.variable_count() << " variables, got " << cols;
    throw DimensionError(msg.str());
  }
}

Matrix Library::evaluate(const Matrix& samples) const {
  check_width(samples.cols());
  const Eigen::Index m = samples.rows();
  const int vars = spec_.variable_count();
  const int max_power = std::max(spec_.poly_order, 1);
  Matrix theta(m, size());
  // powers[k * (max_power + 1) + e] = v_k^e for the current row
  std::vector<double> powers(static_cast<std::size_t>(vars * (max_power + 1)));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int k = 0; k < vars; ++k) {
      double p = 1.0;
      for (int e = 0; e <= max_power; ++e) {
        powers[static_cast<std::size_t>(k * (max_power + 1) + e)] = p;
        p *= samples(i, k);
      }
    }
    for (int j = 0; j < size(); ++j) {
      const auto& term = terms_[static_cast<std::size_t>(j)];
      double value = 1.0;
      if (term.kind == TermKind::sine) {
        value = std::sin(samples(i, term.variable));
      } else {
        for (int k = 0; k < vars; ++k) {
          const int e = term.exponents[static_cast<std::size_t>(k)];
          if (e != 0) value *= powers[static_cast<std::size_t>(k * (max_power + 1) + e)];
        }
      }
      theta(i, j) = value;
    }
  }
  return theta;
}

Matrix Library::gradient(const RowVector& point) const {
  check_width(point.size());
  const int vars = spec_.variable_count();
  Matrix jac = Matrix::Zero(size(), vars);
  for (int j = 0; j < size(); ++j) {
    const auto& term = terms_[static_cast<std::size_t>(j)];
    if (term.kind == TermKind::sine) {
      jac(j, term.variable) = std::cos(point(term.variable));
      continue;
    }
    if (term.kind == TermKind::constant) continue;
    for (int k = 0; k < vars; ++k) {
      const int ek = term.exponents[static_cast<std::size_t>(k)];
      if (ek == 0) continue;
      double value = static_cast<double>(ek) * integer_power(point(k), ek - 1);
      for (int q = 0; q < vars; ++q) {
        if (q == k) continue;
        value *= integer_power(point(q), term.exponents[static_cast<std::size_t>(q)]);
      }
      jac(j, k) = value;
    }
  }
  return jac;
}

Matrix Library::pullback(const Matrix& samples, const Matrix& adjoint) const {
  check_width(samples.cols());
  if (adjoint.rows() != samples.rows() || adjoint.cols() != size())
    throw DimensionError("Library::pullback: adjoint must be m x p");
  const Eigen::Index m = samples.rows();
  const int vars = spec_.variable_count();
  Matrix out = Matrix::Zero(m, vars);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int j = 0; j < size(); ++j) {
      const double a = adjoint(i, j);
      if (a == 0.0) continue;
      const auto& term = terms_[static_cast<std::size_t>(j)];
      if (term.kind == TermKind::sine) {
        out(i, term.variable) += a * std::cos(samples(i, term.variable));
        continue;
      }
      if (term.kind == TermKind::constant) continue;
      for (int k = 0; k < vars; ++k) {
        const int ek = term.exponents[static_cast<std::size_t>(k)];
        if (ek == 0) continue;
        double value = static_cast<double>(ek) * integer_power(samples(i, k), ek - 1);
        for (int q = 0; q < vars; ++q) {
          if (q == k) continue;
          value *= integer_power(samples(i, q), term.exponents[static_cast<std::size_t>(q)]);
        }
        out(i, k) += a * value;
      }
    }
  }
  return out;
}

Matrix evaluate_library(const Matrix& samples, const LibrarySpec& spec) {
  return Library(spec).evaluate(samples);
}

Matrix library_gradient(const RowVector& point, const LibrarySpec& spec) {
  return Library(spec).gradient(point);
}

}  // namespace sindyae
