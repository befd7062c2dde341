#pragma once

#include <functional>
#include <optional>

#include "perturbmc/markov.hpp"

namespace perturbmc {

using Evaluator = std::function<Matrix(double)>;

/// Controlled transition family P_zeta together with its Taylor data at
/// zeta = 0: P0 (value), E (first derivative), W (second derivative).
/// E and W annihilate the all-ones vector since P_zeta 1 = 1 for every zeta.
struct ControlledFamily {
  StochasticMatrix P0;
  Matrix E;
  Matrix W;
  Evaluator evaluate;       // exact P_zeta
  double zeta_min = -1.0;
  double zeta_max = 1.0;
  int dim() const { return P0.dim; }
};

/// Scaled stationary input zeta_t = eps * zeta1_t where zeta1 is a
/// finite-state chain with alphabet `states` and transition matrix K.
/// K may carry negative entries (formal models used for exact linear
/// algebra); `simulable` records whether it is an actual chain.
struct GeometricCovariance {
  Vector coeffs;  // a_k
  Vector poles;   // rho_k, distinct, |rho_k| < 1
};

struct InputSpec {
  Vector states;   // z_i, |z_i| <= 1
  Matrix K;
  Vector mu;       // stationary pmf of K
  double epsilon = 0.0;
  bool simulable = true;
  std::optional<GeometricCovariance> geom;  // set when the A3 form exists
  int n_states() const { return static_cast<int>(states.size()); }
};

/// Builds a family with explicit derivatives; enforces E 1 = 0, W 1 = 0 and
/// evaluate(0) == P0.
ControlledFamily make_family(StochasticMatrix P0, Matrix E, Matrix W, Evaluator evaluate,
                             double zeta_min, double zeta_max);

/// Central-difference construction of (E, W) from the evaluator alone.
/// Derivative rows are projected to zero sum: the row-sum identity is exact
/// while the entries keep their O(h^2) accuracy.
ControlledFamily taylor_from_evaluator(Evaluator evaluate, double zeta_min, double zeta_max,
                                       double h = 1e-4);

/// Validates the input process (zero stationary mean, bounded alphabet) and
/// attaches the geometric covariance representation when K admits one.
InputSpec make_input(Vector states, Matrix K, double epsilon);

/// R_{zeta1}(t), the unscaled autocovariance. Uses the geometric form when
/// available, otherwise iterated K-products (stable for genuine chains).
double input_autocovariance(const InputSpec& in, long t);

/// R_zeta(t) = eps^2 R_{zeta1}(t).
double input_autocov_scaled(const InputSpec& in, long t);

/// {a_k, rho_k} with R_{zeta1}(t) = sum_k a_k rho_k^{|t|}. Throws
/// NonGeometricCovariance when K has complex or repeated active poles or the
/// reconstruction check fails; callers fall back to lag-domain sums.
GeometricCovariance geometric_representation(const InputSpec& in);

/// S_{zeta1}(theta) = sum_t R_{zeta1}(t) e^{-i theta t}, real by symmetry.
double input_psd(const InputSpec& in, double theta);

}  // namespace perturbmc
