#pragma once

#include <string>
#include <vector>

#include "sindyae/core_math.hpp"

namespace sindyae {

/// Declarative description of the candidate function library Theta.
///
/// For model_order 2 the library inputs are (z, dz/dt) concatenated, so the
/// library sees 2 * state_dim variables.
struct LibrarySpec {
  int state_dim = 1;
  int poly_order = 1;
  bool include_sine = false;
  int model_order = 1;

  int variable_count() const { return state_dim * model_order; }
  /// Closed-form term count C(v + poly_order, poly_order) + (sine ? v : 0).
  int term_count() const;
  void validate() const;

  bool operator==(const LibrarySpec&) const = default;
};

enum class TermKind { constant, monomial, sine };

struct TermDescriptor {
  TermKind kind = TermKind::constant;
  std::vector<int> exponents;  // monomial and constant terms, length = variable count
  int variable = -1;           // sine terms only
  std::string name;
};

/// Display name of library variable `index`: z1..zd, then dz1..dzd for order 2.
std::string variable_name(const LibrarySpec& spec, int index);

/// Terms in graded lexicographic order: constant, monomials by total degree
/// (variable 1 most significant, higher exponent first), then sin(v1)..sin(vv).
std::vector<TermDescriptor> enumerate_terms(const LibrarySpec& spec);

/// Evaluates Theta on the rows of a sample matrix.
class Library {
 public:
  explicit Library(LibrarySpec spec);

  const LibrarySpec& spec() const { return spec_; }
  const std::vector<TermDescriptor>& terms() const { return terms_; }
  int size() const { return static_cast<int>(terms_.size()); }
  std::vector<std::string> names() const;

  /// m x v samples to m x p library matrix.
  Matrix evaluate(const Matrix& samples) const;

  /// p x v Jacobian of the library at a single point.
  Matrix gradient(const RowVector& point) const;

  /// Vector-Jacobian product over a batch: row i of the result is
  /// sum_j adjoint(i, j) * d theta_j / d v evaluated at samples.row(i).
  Matrix pullback(const Matrix& samples, const Matrix& adjoint) const;

 private:
  void check_width(Eigen::Index cols) const;

  LibrarySpec spec_;
  std::vector<TermDescriptor> terms_;
};

Matrix evaluate_library(const Matrix& samples, const LibrarySpec& spec);
Matrix library_gradient(const RowVector& point, const LibrarySpec& spec);

}  // namespace sindyae
