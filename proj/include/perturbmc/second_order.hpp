#pragma once

#include "perturbmc/lag_series.hpp"
#include "perturbmc/model.hpp"

namespace perturbmc {

struct Truncation {
  double tol = 1e-12;
  int max_terms = 0;  // 0 = derive from dimension and observed decay
};

/// Immutable bundle shared by the second-order approximations. B is stored
/// as a column vector, B = E^T pi0 (the row B^T = pi0 E of the formulas).
struct SecondOrderContext {
  ControlledFamily family;
  InputSpec input;
  Vector pi0;
  Matrix U1;
  Vector B;
  double sigma2_zeta1 = 0.0;  // Var(zeta^1)
  Truncation trunc;

  int dim() const { return family.dim(); }
  double epsilon() const { return input.epsilon; }
  const Matrix& P0() const { return family.P0.P; }
  double r_zeta(long t) const { return input_autocov_scaled(input, t); }
};

SecondOrderContext make_context(ControlledFamily family, InputSpec input, Truncation trunc = {});

/// R_{Gamma,zeta}(t): truncated series sum_{i>=1} (B^T P0^{i-1})^T R_zeta(t-i).
/// Truncation per the observed geometric decay of ||B^T P0^{i-1}||.
Vector cross_corr_gamma_zeta(const SecondOrderContext& ctx, long t);

/// Batch of R_{Gamma,zeta}(t) over a lag window (d x 1 blocks), sharing the
/// power precomputation.
LagSeries cross_corr_gamma_zeta_series(const SecondOrderContext& ctx, int lag_min, int lag_max);

/// The truncated family b_i = (B^T P0^{i-1})^T, i = 1..i*, behind the lag
/// sums. Stops once ||b_i|| < tol with five consecutive decays; the hard cap
/// is 10 d / (1 - rho_hat) with rho_hat estimated from successive ratios.
std::vector<Vector> gamma_zeta_power_columns(const SecondOrderContext& ctx);

/// xi = (R_{Gamma,zeta}(0))^T E + (1/2) sigma_zeta^2 pi0 W, returned as a
/// column vector (transpose of the formula's row). Uses the pole closed form
/// when the input carries one, the lag-domain sum otherwise.
Vector xi_vector(const SecondOrderContext& ctx);
Vector xi_vector_lag(const SecondOrderContext& ctx);
Vector xi_vector_geometric(const SecondOrderContext& ctx);

/// pi_hat_eps = pi0 + xi U1. Entries may go slightly negative for large eps;
/// they are reported as-is (see has_negative_mass).
Vector steady_state_mean_approx(const SecondOrderContext& ctx);
bool has_negative_mass(const Vector& pi);

/// Sigma^{Delta bullet} = Pi0 - P0^T Pi0 P0 (nominal covariance).
Matrix delta_covariance_nominal(const SecondOrderContext& ctx);

/// Second-order Sigma^Delta.
Matrix delta_covariance(const SecondOrderContext& ctx);

/// R_{Delta^2,zeta}(-t) for t >= 0.
Matrix r_delta2_zeta(const SecondOrderContext& ctx, long t);

/// R_{B zeta}(t); negative lags by transpose symmetry.
Matrix r_bzeta(const SecondOrderContext& ctx, long t);

/// R_{B zeta, Delta}(t): zero for t < 0, finite sums otherwise.
Matrix r_bzeta_delta(const SecondOrderContext& ctx, long t);

/// R_{V zeta^2, Delta}(t): zero for t < 0.
Matrix r_vzeta2_delta(const SecondOrderContext& ctx, long t);

/// Assembled R_D(t); satisfies R_D(-t) = R_D(t)^T by construction.
Matrix r_d(const SecondOrderContext& ctx, long t);

/// R_{D,zeta}(t) = B R_zeta(t-1).
Vector r_d_zeta(const SecondOrderContext& ctx, long t);

/// Batch evaluation of R_D over a lag window with shared precomputation;
/// identical values to per-lag r_d().
LagSeries r_d_series(const SecondOrderContext& ctx, int lag_min, int lag_max);

}  // namespace perturbmc
