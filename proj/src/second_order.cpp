#include "perturbmc/second_order.hpp"

#include <cmath>
#include <vector>

namespace perturbmc {

SecondOrderContext make_context(ControlledFamily family, InputSpec input, Truncation trunc) {
  ErgodicFlags flags = check_ergodic(family.P0);
  if (!flags.irreducible) throw Error(Errc::NotIrreducible, "P0 has multiple closed classes");
  if (!flags.aperiodic) throw Error(Errc::InvalidInput, "P0 is periodic");
  SecondOrderContext ctx;
  ctx.pi0 = stationary_distribution(family.P0).p;
  ctx.U1 = fundamental_matrix(family.P0, ProbabilityVector{ctx.pi0}).U;
  ctx.B = family.E.transpose() * ctx.pi0;
  if (std::abs(ctx.B.sum()) > 1e-10)
    throw Error(Errc::InvalidInput, "B^T 1 != 0; E rows are not zero-sum");
  ctx.sigma2_zeta1 = input_autocovariance(input, 0);
  ctx.trunc = trunc;
  ctx.family = std::move(family);
  ctx.input = std::move(input);
  return ctx;
}

std::vector<Vector> gamma_zeta_power_columns(const SecondOrderContext& ctx) {
  const double tol = ctx.trunc.tol * std::max(1.0, ctx.B.cwiseAbs().maxCoeff());
  std::vector<Vector> cs;
  cs.push_back(ctx.B);
  int decaying = 0;
  double prev = ctx.B.cwiseAbs().maxCoeff();
  double rho_hat = 0.5;  // running ratio estimate, refined as terms arrive
  while (true) {
    double norm = cs.back().cwiseAbs().maxCoeff();
    if (norm < tol && decaying >= 5) break;
    int cap = ctx.trunc.max_terms > 0
                  ? ctx.trunc.max_terms
                  : std::max(1000, static_cast<int>(10.0 * ctx.dim() /
                                                    (1.0 - std::min(rho_hat, 0.9999))));
    if (static_cast<int>(cs.size()) >= cap)
      throw Error(Errc::TruncationNotConverged,
                  "no geometric decay after " + std::to_string(cs.size()) + " terms");
    cs.push_back(ctx.P0().transpose() * cs.back());
    double cur = cs.back().cwiseAbs().maxCoeff();
    if (prev > 0.0 && cur > 0.0) {
      double ratio = cur / prev;
      rho_hat = cs.size() < 20 ? std::max(rho_hat, ratio) : 0.9 * rho_hat + 0.1 * ratio;
    }
    decaying = (cur <= prev) ? decaying + 1 : 0;
    prev = cur;
  }
  return cs;
}

namespace {

Vector gamma_zeta_from_powers(const SecondOrderContext& ctx, const std::vector<Vector>& cs,
                              long t) {
  Vector acc = Vector::Zero(ctx.dim());
  for (size_t i = 1; i <= cs.size(); ++i)
    acc += cs[i - 1] * input_autocovariance(ctx.input, t - static_cast<long>(i));
  return ctx.epsilon() * ctx.epsilon() * acc;
}

}  // namespace

Vector cross_corr_gamma_zeta(const SecondOrderContext& ctx, long t) {
  if (ctx.epsilon() == 0.0) return Vector::Zero(ctx.dim());
  return gamma_zeta_from_powers(ctx, gamma_zeta_power_columns(ctx), t);
}

LagSeries cross_corr_gamma_zeta_series(const SecondOrderContext& ctx, int lag_min, int lag_max) {
  LagSeries out = LagSeries::zeros(lag_min, lag_max, ctx.dim(), 1, "R_Gamma_zeta");
  if (ctx.epsilon() == 0.0) return out;
  std::vector<Vector> cs = gamma_zeta_power_columns(ctx);
  for (int t = lag_min; t <= lag_max; ++t) out.at(t) = gamma_zeta_from_powers(ctx, cs, t);
  return out;
}

Vector xi_vector_lag(const SecondOrderContext& ctx) {
  Vector nu0 = cross_corr_gamma_zeta(ctx, 0);
  return ctx.family.E.transpose() * nu0 +
         0.5 * ctx.r_zeta(0) * (ctx.family.W.transpose() * ctx.pi0);
}

Vector xi_vector_geometric(const SecondOrderContext& ctx) {
  if (!ctx.input.geom)
    throw Error(Errc::NonGeometricCovariance, "input has no geometric representation");
  const int d = ctx.dim();
  const double eps2 = ctx.epsilon() * ctx.epsilon();
  Vector acc = Vector::Zero(d);
  for (int k = 0; k < ctx.input.geom->poles.size(); ++k) {
    double rho = ctx.input.geom->poles(k);
    double a = ctx.input.geom->coeffs(k);
    if (rho == 0.0 || a == 0.0) continue;
    Matrix M = (Matrix::Identity(d, d) - rho * ctx.P0()).transpose();
    acc += a * rho * M.partialPivLu().solve(ctx.B);
  }
  return eps2 * (ctx.family.E.transpose() * acc) +
         0.5 * eps2 * ctx.sigma2_zeta1 * (ctx.family.W.transpose() * ctx.pi0);
}

Vector xi_vector(const SecondOrderContext& ctx) {
  if (ctx.epsilon() == 0.0) return Vector::Zero(ctx.dim());
  return ctx.input.geom ? xi_vector_geometric(ctx) : xi_vector_lag(ctx);
}

Vector steady_state_mean_approx(const SecondOrderContext& ctx) {
  if (ctx.epsilon() == 0.0) return ctx.pi0;
  return ctx.pi0 + ctx.U1.transpose() * xi_vector(ctx);
}

bool has_negative_mass(const Vector& pi) { return pi.minCoeff() < 0.0; }

Matrix delta_covariance_nominal(const SecondOrderContext& ctx) {
  Matrix Pi0 = ctx.pi0.asDiagonal();
  return Pi0 - ctx.P0().transpose() * Pi0 * ctx.P0();
}

Matrix delta_covariance(const SecondOrderContext& ctx) {
  const Matrix& P0 = ctx.P0();
  const Matrix& E = ctx.family.E;
  const Matrix& W = ctx.family.W;
  Matrix Pih = Matrix(steady_state_mean_approx(ctx).asDiagonal());
  Matrix out = Pih - P0.transpose() * Pih * P0;
  if (ctx.epsilon() != 0.0) {
    Matrix D0 = Matrix(cross_corr_gamma_zeta(ctx, 0).asDiagonal());
    out -= P0.transpose() * D0 * E + E.transpose() * D0 * P0;
    Matrix Pi0 = ctx.pi0.asDiagonal();
    out -= 0.5 * ctx.r_zeta(0) *
           (P0.transpose() * Pi0 * W + 2.0 * E.transpose() * Pi0 * E + W.transpose() * Pi0 * P0);
  }
  return out;
}

namespace {

// E[X_bullet^(1)] = diag(pi0 E) - (P0^T Pi0 E + [P0^T Pi0 E]^T)
Matrix x_bullet_first_derivative(const SecondOrderContext& ctx) {
  Matrix M = ctx.P0().transpose() * Matrix(ctx.pi0.asDiagonal()) * ctx.family.E;
  return Matrix(ctx.B.asDiagonal()) - (M + M.transpose());
}

Matrix r_delta2_zeta_from_nu(const SecondOrderContext& ctx, const Vector& nu, long t) {
  const Matrix& P0 = ctx.P0();
  Vector nuP = P0.transpose() * nu;  // row nu * P0, as a column
  return Matrix(nuP.asDiagonal()) - P0.transpose() * Matrix(nu.asDiagonal()) * P0 +
         ctx.r_zeta(t + 1) * x_bullet_first_derivative(ctx);
}

}  // namespace

Matrix r_delta2_zeta(const SecondOrderContext& ctx, long t) {
  if (t < 0) throw Error(Errc::LagTooLarge, "r_delta2_zeta expects t >= 0");
  if (ctx.epsilon() == 0.0) return Matrix::Zero(ctx.dim(), ctx.dim());
  return r_delta2_zeta_from_nu(ctx, cross_corr_gamma_zeta(ctx, -t - 1), t);
}

Matrix r_bzeta(const SecondOrderContext& ctx, long t) {
  const int d = ctx.dim();
  if (ctx.epsilon() == 0.0) return Matrix::Zero(d, d);
  if (t < 0) return r_bzeta(ctx, -t).transpose();
  Matrix P0t = Matrix::Identity(d, d);
  for (long k = 0; k < t; ++k) P0t = P0t * ctx.P0();
  return (P0t * ctx.family.E).transpose() * Matrix(ctx.pi0.asDiagonal()) * ctx.family.E *
         ctx.r_zeta(t);
}

Matrix r_bzeta_delta(const SecondOrderContext& ctx, long t) {
  const int d = ctx.dim();
  if (t < 0 || ctx.epsilon() == 0.0) return Matrix::Zero(d, d);
  const Matrix& E = ctx.family.E;
  if (t == 0) return E.transpose() * r_delta2_zeta(ctx, 0);
  Matrix A = ctx.P0().transpose();
  std::vector<Matrix> Apow(static_cast<size_t>(t) + 1);
  Apow[0] = Matrix::Identity(d, d);
  for (long k = 1; k <= t; ++k) Apow[static_cast<size_t>(k)] = A * Apow[static_cast<size_t>(k - 1)];
  Matrix sum = Matrix::Zero(d, d);
  for (long i = 0; i < t; ++i)
    sum += Apow[static_cast<size_t>(t - 1 - i)] * E.transpose() * Apow[static_cast<size_t>(i)] *
           ctx.r_zeta(t - i);
  return E.transpose() * Apow[static_cast<size_t>(t)] * r_delta2_zeta(ctx, t) +
         E.transpose() * sum * delta_covariance_nominal(ctx);
}

Matrix r_vzeta2_delta(const SecondOrderContext& ctx, long t) {
  const int d = ctx.dim();
  if (t < 0 || ctx.epsilon() == 0.0) return Matrix::Zero(d, d);
  if (ctx.family.W.cwiseAbs().maxCoeff() == 0.0) return Matrix::Zero(d, d);
  Matrix P0t = Matrix::Identity(d, d);
  for (long k = 0; k < t; ++k) P0t = P0t * ctx.P0();
  return 0.5 * ctx.r_zeta(0) * (P0t * ctx.family.W).transpose() * delta_covariance_nominal(ctx);
}

Matrix r_d(const SecondOrderContext& ctx, long t) {
  Matrix out = r_bzeta(ctx, t);
  if (t == 0) out += delta_covariance(ctx);
  out += r_bzeta_delta(ctx, t - 1) + r_bzeta_delta(ctx, -t - 1).transpose();
  out += r_vzeta2_delta(ctx, t - 1) + r_vzeta2_delta(ctx, -t - 1).transpose();
  return out;
}

Vector r_d_zeta(const SecondOrderContext& ctx, long t) {
  if (ctx.epsilon() == 0.0) return Vector::Zero(ctx.dim());
  return ctx.B * ctx.r_zeta(t - 1);
}

LagSeries r_d_series(const SecondOrderContext& ctx, int lag_min, int lag_max) {
  const int d = ctx.dim();
  LagSeries out = LagSeries::zeros(lag_min, lag_max, d, d, "R_D");
  if (ctx.epsilon() == 0.0) {
    if (out.contains(0)) out.at(0) = delta_covariance_nominal(ctx);
    return out;
  }

  const Matrix& E = ctx.family.E;
  const Matrix& W = ctx.family.W;
  const Matrix& P0 = ctx.P0();
  const bool has_w = W.cwiseAbs().maxCoeff() != 0.0;
  const int L = std::max(std::max(lag_max, -lag_min), 1);

  std::vector<Vector> cs = gamma_zeta_power_columns(ctx);
  Matrix SDb = delta_covariance_nominal(ctx);
  Matrix SD;
  {
    Vector nu0 = gamma_zeta_from_powers(ctx, cs, 0);
    Vector xi = E.transpose() * nu0 + 0.5 * ctx.r_zeta(0) * (W.transpose() * ctx.pi0);
    Matrix Pih = Matrix(Vector(ctx.pi0 + ctx.U1.transpose() * xi).asDiagonal());
    Matrix D0 = Matrix(nu0.asDiagonal());
    Matrix Pi0 = ctx.pi0.asDiagonal();
    SD = Pih - P0.transpose() * Pih * P0 - (P0.transpose() * D0 * E + E.transpose() * D0 * P0) -
         0.5 * ctx.r_zeta(0) *
             (P0.transpose() * Pi0 * W + 2.0 * E.transpose() * Pi0 * E + W.transpose() * Pi0 * P0);
  }

  std::vector<Matrix> Apow(static_cast<size_t>(L) + 1);
  Apow[0] = Matrix::Identity(d, d);
  Matrix A = P0.transpose();
  for (int k = 1; k <= L; ++k) Apow[static_cast<size_t>(k)] = A * Apow[static_cast<size_t>(k - 1)];
  std::vector<Matrix> EtA(static_cast<size_t>(L) + 1);  // E^T A^i
  for (int k = 0; k <= L; ++k) EtA[static_cast<size_t>(k)] = E.transpose() * Apow[static_cast<size_t>(k)];

  // R_{B zeta, Delta}(t), t = 0..L-1 (r_d uses shifts t-1 and -t-1)
  std::vector<Matrix> rbzd(static_cast<size_t>(L), Matrix::Zero(d, d));
  for (int t = 0; t < L; ++t) {
    Matrix rd2 = r_delta2_zeta_from_nu(ctx, gamma_zeta_from_powers(ctx, cs, -t - 1), t);
    if (t == 0) {
      rbzd[0] = E.transpose() * rd2;
      continue;
    }
    Matrix sum = Matrix::Zero(d, d);
    for (int i = 0; i < t; ++i)
      sum += Apow[static_cast<size_t>(t - 1 - i)] * EtA[static_cast<size_t>(i)] * ctx.r_zeta(t - i);
    rbzd[static_cast<size_t>(t)] = EtA[static_cast<size_t>(t)] * rd2 + E.transpose() * sum * SDb;
  }

  Matrix Pi0 = ctx.pi0.asDiagonal();
  for (int t = lag_min; t <= lag_max; ++t) {
    const int a = std::abs(t);
    // (P0^a E)^T Pi0 E R_zeta(a) = E^T A^a Pi0 E R_zeta(a)
    Matrix rb = EtA[static_cast<size_t>(a)] * Pi0 * E * ctx.r_zeta(a);
    if (t < 0) rb = rb.transpose().eval();
    Matrix val = rb;
    if (t == 0) val += SD;
    if (t - 1 >= 0 && t - 1 < L) val += rbzd[static_cast<size_t>(t - 1)];
    if (-t - 1 >= 0 && -t - 1 < L) val += rbzd[static_cast<size_t>(-t - 1)].transpose();
    if (has_w) {
      if (t - 1 >= 0) {
        Matrix rv = 0.5 * ctx.r_zeta(0) * W.transpose() * Apow[static_cast<size_t>(t - 1)] * SDb;
        val += rv;
      }
      if (-t - 1 >= 0) {
        Matrix rv = 0.5 * ctx.r_zeta(0) * W.transpose() * Apow[static_cast<size_t>(-t - 1)] * SDb;
        val += rv.transpose();
      }
    }
    out.at(t) = val;
  }
  return out;
}

}  // namespace perturbmc
