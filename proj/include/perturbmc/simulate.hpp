#pragma once

#include <cstdint>
#include <span>

#include "perturbmc/lag_series.hpp"
#include "perturbmc/model.hpp"

namespace perturbmc {

/// Coupled realization of (X, X_bullet, zeta1). X_bullet runs the nominal
/// chain on its own uniform stream; X re-uses that stream while the states
/// agree and switches to an independent one while they differ.
struct CoupledPath {
  std::vector<int32_t> x;
  std::vector<int32_t> x_bullet;
  std::vector<int32_t> zeta_state;  // index into the input alphabet
  uint64_t seed = 0;
  int burn_in = 0;
  long length() const { return static_cast<long>(x.size()); }
};

/// Inverse-CDF draw with cumulative sums in fixed index order; the ordering
/// is part of the coupling construction.
int sample_row(std::span<const double> row, double u);

/// Deterministic stream-indexed uniforms (splitmix-seeded xoshiro-free
/// mt19937_64); stream i of a given seed is independent of stream j.
class UniformStream {
 public:
  UniformStream(uint64_t seed, uint64_t stream);
  double next();  // [0, 1)

 private:
  uint64_t s_[4];
};

CoupledPath simulate_coupled(const ControlledFamily& family, const InputSpec& input, long T,
                             uint64_t seed, int burn_in = 10000);

/// Delta_{t+1} = e_{x_{t+1}} - row x_t of P_{zeta_t}; length T-1. Intended
/// for test-scale paths (dense vectors).
std::vector<Vector> extract_delta(const CoupledPath& path, const ControlledFamily& family,
                                  const InputSpec& input);

/// Plug-in correlation estimates with batch-means standard errors.
struct EmpiricalSeries {
  LagSeries mean;
  LagSeries se;  // same shape; entries > 0 where the estimator varies
  long samples = 0;
  int batches = 0;
};

EmpiricalSeries empirical_corr(const std::vector<Vector>& a, const std::vector<Vector>& b,
                               int lag_min, int lag_max, int n_batches = 100);

/// One-pass martingale-difference diagnostics of a coupled path: mean of
/// Delta, R_{Delta,zeta}(k) for |k| <= k_max, R_Delta(t) for t in 0..t_max
/// (Sigma^Delta is the t = 0 entry), all with batch-means standard errors.
struct MartingaleStats {
  EmpiricalSeries delta_mean;    // single lag 0, d x 1
  EmpiricalSeries r_delta_zeta;  // lags -k_max..k_max, d x 1
  EmpiricalSeries r_delta;       // lags 0..t_max, d x d
};

MartingaleStats martingale_stats(const CoupledPath& path, const ControlledFamily& family,
                                 const InputSpec& input, int k_max, int t_max,
                                 int n_batches = 100);

struct CouplingRate {
  double epsilon = 0.0;
  double rate = 0.0;
  double se = 0.0;
};

/// Mismatch frequency P{X != X_bullet} per epsilon, each on its own stream
/// set. Parallel across the epsilon sweep; serial twin for tests.
std::vector<CouplingRate> coupling_rate(const ControlledFamily& family, const InputSpec& input,
                                        const std::vector<double>& eps_list, long T,
                                        uint64_t seed);
std::vector<CouplingRate> coupling_rate_serial(const ControlledFamily& family,
                                               const InputSpec& input,
                                               const std::vector<double>& eps_list, long T,
                                               uint64_t seed);

InputSpec with_epsilon(const InputSpec& input, double epsilon);

/// CSV path export: columns t, x, x_bullet, zeta1 with the seed in a header
/// comment.
void export_path_csv(const CoupledPath& path, const InputSpec& input, const std::string& file);

}  // namespace perturbmc
