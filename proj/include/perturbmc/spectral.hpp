#pragma once

#include <complex>

#include "perturbmc/second_order.hpp"

namespace perturbmc {

using CMatrix = Eigen::MatrixXcd;

/// Matrix-valued spectrum sampled on a uniform grid of M points covering
/// [-pi, pi] inclusive; the grid is symmetric under m <-> M-1-m, so
/// Hermitian symmetry S(-theta) = S(theta)* is checkable exactly.
struct SpectralGrid {
  Eigen::ArrayXd thetas;
  std::vector<CMatrix> values;
  double tail_budget = 0.0;  // bound on the truncated-lag remainder

  int size() const { return static_cast<int>(thetas.size()); }
  static SpectralGrid zeros(int M, int rows, int cols);
};

Eigen::ArrayXd uniform_theta_grid(int M);

/// Mean-removed covariance series with a detected geometric tail.
struct SigmaSeries {
  LagSeries sigma;
  double tail_bound = 0.0;
};

/// Checks the window edges decay geometrically and records the tail bound.
SigmaSeries make_sigma_series(LagSeries sigma);

/// S(theta) = sum_t Sigma(t) e^{-i theta t} over the series window.
/// OpenMP-parallel across grid points; psd_of_series_serial is the reference
/// implementation (bitwise-identical results).
SpectralGrid psd_of_series(const SigmaSeries& series, int grid_size);
SpectralGrid psd_of_series_serial(const SigmaSeries& series, int grid_size);

/// Two-sided R_D window wide enough that the discarded tail is below the
/// 1e-9 error budget. Uses per-pole recursions when the input covariance is
/// geometric, direct sums otherwise.
SigmaSeries r_d_window(const SecondOrderContext& ctx);

/// S_D(theta) assembled from the R_D window.
SpectralGrid psd_D_approx(const SecondOrderContext& ctx, int grid_size);

/// S_Gamma(theta) = [I - e^{-i theta} At]^{-1} S_D(theta) [I - e^{i theta} At^T]^{-1},
/// At = (P0 - 1 (x) pi0)^T. Parallel across theta; *_serial twin for tests.
SpectralGrid psd_gamma(const SecondOrderContext& ctx, const SpectralGrid& S_D);
SpectralGrid psd_gamma_serial(const SecondOrderContext& ctx, const SpectralGrid& S_D);

struct CrossPsd {
  SpectralGrid S_gamma_d;     // d x d
  SpectralGrid S_gamma_zeta;  // d x 1
};

/// Cross spectra of Gamma with the deviation input D and with zeta. The
/// Gamma-zeta spectrum uses the pole closed form
///   eps^2 e^{-i theta} [I - e^{-i theta} At]^{-1} B S_{zeta1}(theta)
/// when available, the truncated lag sum otherwise; both routes agree to
/// 1e-8 on geometric inputs.
CrossPsd cross_psd_gamma(const SecondOrderContext& ctx, const SpectralGrid& S_D);

/// Lag-domain route for S_{Gamma,zeta}; kept as the cross-check of the
/// closed form.
SpectralGrid cross_psd_gamma_zeta_lag(const SecondOrderContext& ctx, int grid_size);

/// Spectrum of the scalar observable Y_t = f^T Gamma_t + c zeta_t.
SpectralGrid observable_psd(const SecondOrderContext& ctx, const SpectralGrid& S_gamma,
                            const SpectralGrid& S_gamma_zeta, const Vector& f, double c);

/// Mean-removed covariance series Sigma_Gamma(t) of the indicator process,
/// assembled from the R_D window by the stationary two-sided recursions.
LagSeries sigma_gamma_series(const SecondOrderContext& ctx, int lag_max);

/// Trapezoid average (1/2pi) integral of trace S over the grid; Parseval
/// companion of trace Sigma(0).
double parseval_trace(const SpectralGrid& S);

/// CSV export: columns theta, re(S_ij), im(S_ij) for the requested pairs.
void export_spectral_csv(const SpectralGrid& S,
                         const std::vector<std::pair<int, int>>& index_pairs,
                         const std::string& path, const std::string& header_comment);

}  // namespace perturbmc
