#pragma once

#include "perturbmc/lag_series.hpp"

namespace perturbmc {

/// chi^2_k quantile at the two-sided-3-sigma level 0.9973 (exact for k = 1,
/// Wilson-Hilferty otherwise).
double chi2_quantile_9973(int k);

/// Inverse standard normal CDF (Acklam's approximation, ~1e-9 accurate).
double normal_quantile(double p);

/// One test per named Monte Carlo quantity at the two-sided 3-sigma level:
/// the largest studentized entry against the Bonferroni-adjusted normal
/// quantile z* = Phi^{-1}(1 - 0.00135/k). Valid whatever the correlation
/// between entries (components of Delta are linearly dependent), and equal
/// to the plain |z| <= 3 rule for scalars. Entries with zero standard error
/// must be zero up to the floor.
struct AggregateCheck {
  double stat = 0.0;       // max |deviation / se|
  double threshold = 0.0;  // Bonferroni z*
  int dof = 0;             // entries with positive se
  double max_abs_no_se = 0.0;
  bool pass = false;
};

AggregateCheck studentized_aggregate(const Matrix& deviation, const Matrix& se,
                                     double zero_floor = 1e-12);

/// Least-squares slope of log y against log x.
double fit_loglog_slope(const std::vector<std::pair<double, double>>& xy);

}  // namespace perturbmc
