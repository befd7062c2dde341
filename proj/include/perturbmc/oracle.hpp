#pragma once

#include <memory>
#include <mutex>

#include "perturbmc/spectral.hpp"

namespace perturbmc {

/// Lifted chain Psi_t = (X_t, zeta1_t) on d * n_z states, flat index
/// x * n_z + z (x-major). Ground truth for every approximation when the
/// input is finite-state Markov. P may carry negative entries when the
/// input chain is a formal (signed) model; such chains support the linear
/// algebra but not simulation.
struct JointChain {
  Matrix P;
  Vector pi;
  int d = 0;
  int nz = 0;
  Vector input_values;  // eps * z_i
  bool simulable = true;

  int flat(int x, int z) const { return x * nz + z; }
  int n_states() const { return d * nz; }
  const Matrix& power(int n) const;  // memoized P^n, thread-safe

 private:
  struct PowerCache {
    std::mutex m;
    std::vector<Matrix> powers;
  };
  std::shared_ptr<PowerCache> cache_ = std::make_shared<PowerCache>();
};

JointChain build_joint(const ControlledFamily& family, const InputSpec& input);

/// pi_eps(x) = sum_z pi_joint(x, z).
Vector exact_marginal(const JointChain& jc);

/// E[f(Psi_t) g(Psi_0)] in steady state; f, g swap for negative lags.
double exact_cross_corr(const JointChain& jc, const Vector& f, const Vector& g, long t);

/// R_Gamma(t)(i, j) = P(X_t = i, X_0 = j); R(-t) = R(t)^T.
Matrix exact_gamma_corr(const JointChain& jc, long t);

/// E[Gamma_t zeta_0] as a length-d vector.
Vector exact_gamma_zeta_corr(const JointChain& jc, long t);

/// Mean-removed covariance series Sigma_{f,g}(t), |t| <= lag_max, as 1x1
/// blocks; evaluated by deviation-matrix iteration.
LagSeries exact_sigma_series(const JointChain& jc, const Vector& f, const Vector& g, int lag_max);

/// S_{f,g}(theta) by the closed-form resolvent of the deviation matrix; two
/// complex solves per grid point. Parallel across theta with a serial twin.
SpectralGrid exact_psd(const JointChain& jc, const Vector& f, const Vector& g, int grid_size);
SpectralGrid exact_psd_serial(const JointChain& jc, const Vector& f, const Vector& g,
                              int grid_size);

struct DeltaStats {
  Matrix sigma_delta;
  LagSeries r_delta2_zeta;  // value at lag -t is R_{Delta^2,zeta}(-t)
};

/// Exact conditional-expectation evaluation of the martingale-difference
/// covariance and its cross-correlation with the input.
DeltaStats exact_delta_stats(const JointChain& jc, const ControlledFamily& family, int t_max);

/// Exact R_D / R_{D,zeta} of the deviation input D_t = Gamma_t - Gamma_{t-1} P0.
/// Coincides with the decomposition's D whenever P_zeta is exactly quadratic.
Matrix exact_r_d(const JointChain& jc, const Matrix& P0, long t);
Vector exact_r_d_zeta(const JointChain& jc, const Matrix& P0, long t);

/// Indicator vector on joint states from a state observable on X.
Vector lift_observable(const JointChain& jc, const Vector& f_x);
/// The input observable zeta on joint states.
Vector input_observable(const JointChain& jc);

void export_joint_csv(const JointChain& jc, const std::string& p_path,
                      const std::string& pi_path);

}  // namespace perturbmc
