#include "perturbmc/stats.hpp"

#include <cmath>

namespace perturbmc {

double chi2_quantile_9973(int k) {
  if (k <= 0) return 0.0;
  if (k == 1) return 9.0;
  if (k == 2) return -2.0 * std::log(1.0 - 0.9973002039367398);
  // Wilson-Hilferty with the one-sided normal quantile of 0.9973
  const double z = normal_quantile(0.9973002039367398);
  double c = 2.0 / (9.0 * k);
  double t = 1.0 - c + z * std::sqrt(c);
  return k * t * t * t;
}

double normal_quantile(double p) {
  // Acklam's rational approximation with one Halley refinement
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step against erfc for full double accuracy
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * std::acos(-1.0)) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

AggregateCheck studentized_aggregate(const Matrix& deviation, const Matrix& se,
                                     double zero_floor) {
  AggregateCheck out;
  for (int i = 0; i < deviation.rows(); ++i)
    for (int j = 0; j < deviation.cols(); ++j) {
      double s = se(i, j);
      double dev = deviation(i, j);
      if (s > 0.0) {
        out.stat = std::max(out.stat, std::abs(dev) / s);
        ++out.dof;
      } else {
        out.max_abs_no_se = std::max(out.max_abs_no_se, std::abs(dev));
      }
    }
  if (out.dof > 0)
    out.threshold = normal_quantile(1.0 - 0.5 * (1.0 - 0.9973002039367398) / out.dof);
  out.pass = (out.stat <= out.threshold) && (out.max_abs_no_se <= zero_floor);
  return out;
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& xy) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xy.size());
  for (auto& [x, y] : xy) {
    double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace perturbmc
