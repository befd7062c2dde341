#pragma once

#include <string>
#include <vector>

#include "perturbmc/markov.hpp"

namespace perturbmc {

/// Contiguous lag-indexed family of equally sized real matrices
/// (correlation / covariance functions). Scalar series use 1x1 blocks.
struct LagSeries {
  int lag_min = 0;
  int lag_max = -1;
  std::vector<Matrix> values;
  std::string kind;

  bool contains(int t) const { return t >= lag_min && t <= lag_max; }
  const Matrix& at(int t) const {
    if (!contains(t)) throw Error(Errc::LagTooLarge, kind + ": lag " + std::to_string(t));
    return values[static_cast<size_t>(t - lag_min)];
  }
  Matrix& at(int t) {
    if (!contains(t)) throw Error(Errc::LagTooLarge, kind + ": lag " + std::to_string(t));
    return values[static_cast<size_t>(t - lag_min)];
  }
  int n_lags() const { return lag_max - lag_min + 1; }

  static LagSeries zeros(int lag_min, int lag_max, int rows, int cols, std::string kind = {}) {
    LagSeries s;
    s.lag_min = lag_min;
    s.lag_max = lag_max;
    s.kind = std::move(kind);
    s.values.assign(static_cast<size_t>(lag_max - lag_min + 1), Matrix::Zero(rows, cols));
    return s;
  }
};

inline LagSeries scalar_series(int lag_min, int lag_max, const std::vector<double>& v,
                               std::string kind = {}) {
  LagSeries s = LagSeries::zeros(lag_min, lag_max, 1, 1, std::move(kind));
  for (int t = lag_min; t <= lag_max; ++t) s.at(t)(0, 0) = v[static_cast<size_t>(t - lag_min)];
  return s;
}

}  // namespace perturbmc
