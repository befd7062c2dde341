#pragma once

#include "perturbmc/lag_series.hpp"
#include "perturbmc/model.hpp"

namespace perturbmc {

/// Finite-buffer uniformized M/M/1 queue observed through departures.
/// States (n, s) with n the queue length and s the departure indicator,
/// flat index n + s (q_bar + 1); d = 2(q_bar + 1). The s-major layout makes
/// the inverse-CDF index order put the arrival target first, so a uniform
/// draw u maps to an arrival exactly when u < lambda (1 + zeta).
struct QueueModel {
  ControlledFamily family;
  double rho = 0.0;
  double lambda = 0.0;
  int q_bar = 0;

  int index(int n, int s) const { return n + s * (q_bar + 1); }
  int dim() const { return 2 * (q_bar + 1); }
  /// Indicator of the departure states (s = 1).
  Vector departure_indicator() const;
};

/// lambda = rho / (1 + rho); transitions (n,s) -> (n+,0) w.p. lambda(1+zeta)
/// and (n,s) -> (n-,1) w.p. 1 - lambda(1+zeta). E has entries +-lambda, W = 0.
QueueModel build_queue_model(double rho, int q_bar);

/// Three-state input alphabet {-1, 0, 1} with nearest-neighbour switching
/// rate gamma. A genuine chain for gamma < 1/2; for gamma in (1/2, 1) the
/// middle self-transition is negative and the spec is formal (linear algebra
/// only), with autocovariance still sigma^2 (1-gamma)^|t|.
InputSpec three_state_input(double gamma, double epsilon);

/// E[Q] under a pmf on the (n, s) states.
double mean_queue(const Vector& pi_x);

struct DistributionPair {
  Vector a;
  Vector b;
};

/// Quadratic divergence: half the chi-squared distance, the closed form of
/// the variational problem sup { psi_a(f)^2 / (2 psi_b(f^2)) : psi_b(f)=0 }.
double dhat(const DistributionPair& pair);

double kl_divergence(const DistributionPair& pair);

/// max_f in the variational problem, f = d psi_a / d psi_b - 1.
Vector dhat_optimizer(const DistributionPair& pair);

struct MiBound {
  double value = 0.0;
  int argmax_n = 0;
};

/// (1/2) sup_n Sigma_{S,zeta}(n)^2 / S_{S x zeta}(0) with
/// S_{S x zeta}(0) = sum_m Sigma_S(m) Sigma_zeta(m). All series scalar.
MiBound mi_lower_bound(const LagSeries& sigma_s_zeta, const LagSeries& sigma_s,
                       const LagSeries& sigma_zeta, int n_lo, int n_hi);

/// Filter-pair generalization: S^alpha_k = sum_m alpha_m (S_{k+m} - E S),
/// zeta^beta likewise; bound (1/2) Sigma_{S^a,z^b}(0)^2 / S_{S^a x z^b}(0).
double mi_lower_bound_filtered(const LagSeries& sigma_s_zeta, const LagSeries& sigma_s,
                               const LagSeries& sigma_zeta, const Vector& alpha,
                               const Vector& beta);

}  // namespace perturbmc
