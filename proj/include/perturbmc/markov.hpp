#pragma once

#include <Eigen/Dense>

#include "perturbmc/errors.hpp"

namespace perturbmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row-stochastic d x d transition matrix. Construct through
/// validate_stochastic() so the invariants (nonnegative entries, unit row
/// sums) hold whenever an instance exists.
struct StochasticMatrix {
  Matrix P;
  int dim = 0;
};

/// Probability mass function on d states, stored as a column vector.
struct ProbabilityVector {
  Vector p;
};

/// U1 = [I - P0 + 1 (x) pi0]^{-1}.
struct FundamentalMatrix {
  Matrix U;
};

struct ErgodicFlags {
  bool irreducible = false;
  bool aperiodic = false;
};

/// Validates entries >= 0 and row sums equal to 1; rows off by less than
/// 1e-12 are renormalized, anything worse is rejected. Each accepted row is
/// nudged so its floating-point sum is exactly 1.
StochasticMatrix validate_stochastic(const Matrix& M);

/// Adjusts the largest entry of each row so the row sums to exactly 1.0 in
/// floating point. Rows must already sum to 1 up to a few ulps.
void close_rows(Matrix& M);

/// Unit-row-sum check without the nonnegativity requirement; used for formal
/// (signed) chains where only the linear algebra is meaningful.
void require_unit_row_sums(const Matrix& M, double tol = 1e-12);

/// Graph classification of the chain. `irreducible` is the unichain
/// property: exactly one closed communicating class (transient states are
/// permitted; the stationary law is still unique). `aperiodic` is gcd of
/// cycle lengths == 1 within that class.
ErgodicFlags check_ergodic(const StochasticMatrix& P);

/// Solves pi P = pi, sum(pi) = 1 by dense LU with the last balance equation
/// replaced by the normalization row.
ProbabilityVector stationary_distribution(const StochasticMatrix& P);

/// Same solver for a raw matrix with unit row sums (no nonnegativity
/// assumed); the caller owns the interpretation.
Vector stationary_of_matrix(const Matrix& P);

FundamentalMatrix fundamental_matrix(const StochasticMatrix& P, const ProbabilityVector& pi);

/// e_n = P^n - 1 (x) pi.
Matrix ergodic_deviation(const StochasticMatrix& P, const ProbabilityVector& pi, int n);

/// Induced infinity norm (max absolute row sum); the truncation-control norm.
double inf_norm(const Matrix& M);

}  // namespace perturbmc
