#include "perturbmc/timing_channel.hpp"

#include <cmath>

namespace perturbmc {

namespace {

// (a', b') with a' + b' == 1 exactly as reals; the smaller entry is derived
// from the larger one (the subtraction is exact when the operand is >= 1/2).
std::pair<double, double> unit_pair(double a) {
  double b = 1.0 - a;
  if (a >= 0.5) return {a, b};
  return {1.0 - b, b};
}

}  // namespace

Vector QueueModel::departure_indicator() const {
  Vector f = Vector::Zero(dim());
  for (int n = 0; n <= q_bar; ++n) f(index(n, 1)) = 1.0;
  return f;
}

QueueModel build_queue_model(double rho, int q_bar) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(Errc::InvalidLoad, "rho must lie in (0, 1)");
  if (q_bar < 1) throw Error(Errc::InvalidLoad, "q_bar >= 1 required");
  const double lambda = rho / (1.0 + rho);
  const int d = 2 * (q_bar + 1);

  auto idx = [q_bar](int n, int s) { return n + s * (q_bar + 1); };
  auto evaluate = [lambda, q_bar, d, idx](double zeta) {
    Matrix P = Matrix::Zero(d, d);
    auto [up, down] = unit_pair(lambda * (1.0 + zeta));
    for (int n = 0; n <= q_bar; ++n) {
      int npl = std::min(n + 1, q_bar), nmi = std::max(n - 1, 0);
      for (int s = 0; s < 2; ++s) {
        P(idx(n, s), idx(npl, 0)) = up;
        P(idx(n, s), idx(nmi, 1)) = down;
      }
    }
    return P;
  };

  Matrix E = Matrix::Zero(d, d);
  for (int n = 0; n <= q_bar; ++n) {
    int npl = std::min(n + 1, q_bar), nmi = std::max(n - 1, 0);
    for (int s = 0; s < 2; ++s) {
      E(idx(n, s), idx(npl, 0)) = lambda;
      E(idx(n, s), idx(nmi, 1)) = -lambda;
    }
  }
  StochasticMatrix P0 = validate_stochastic(evaluate(0.0));
  QueueModel qm;
  qm.family = make_family(std::move(P0), std::move(E), Matrix::Zero(d, d), evaluate, -1.0, 1.0);
  qm.rho = rho;
  qm.lambda = lambda;
  qm.q_bar = q_bar;
  return qm;
}

InputSpec three_state_input(double gamma, double epsilon) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw Error(Errc::InvalidInput, "gamma must lie in (0, 1)");
  Matrix K(3, 3);
  K << 1.0 - gamma, gamma, 0.0,
       gamma, 1.0 - 2.0 * gamma, gamma,
       0.0, gamma, 1.0 - gamma;
  Vector states(3);
  states << -1.0, 0.0, 1.0;
  return make_input(std::move(states), std::move(K), epsilon);
}

double mean_queue(const Vector& pi_x) {
  if (pi_x.size() % 2 != 0) throw Error(Errc::DimensionMismatch, "expected (n, s) state layout");
  const int half = static_cast<int>(pi_x.size()) / 2;
  double m = 0.0;
  for (int n = 0; n < half; ++n) m += n * (pi_x(n) + pi_x(n + half));
  return m;
}

namespace {

void check_pair(const DistributionPair& pair) {
  if (pair.a.size() != pair.b.size()) throw Error(Errc::DimensionMismatch, "supports differ");
  for (const Vector* v : {&pair.a, &pair.b}) {
    if (v->minCoeff() < 0.0) throw Error(Errc::InvalidInput, "negative pmf entry");
    if (std::abs(v->sum() - 1.0) > 1e-9) throw Error(Errc::InvalidInput, "pmf does not sum to 1");
  }
}

}  // namespace

double dhat(const DistributionPair& pair) {
  check_pair(pair);
  double acc = 0.0;
  for (int i = 0; i < pair.a.size(); ++i) {
    if (pair.b(i) == 0.0) {
      if (pair.a(i) > 0.0)
        throw Error(Errc::SupportViolation, "psi_a charges a psi_b-null state");
      continue;
    }
    double diff = pair.a(i) - pair.b(i);
    acc += diff * diff / pair.b(i);
  }
  return 0.5 * acc;
}

Vector dhat_optimizer(const DistributionPair& pair) {
  check_pair(pair);
  Vector f = Vector::Zero(pair.a.size());
  for (int i = 0; i < pair.a.size(); ++i) {
    if (pair.b(i) == 0.0) continue;
    f(i) = pair.a(i) / pair.b(i) - 1.0;
  }
  return f;
}

double kl_divergence(const DistributionPair& pair) {
  check_pair(pair);
  double acc = 0.0;
  for (int i = 0; i < pair.a.size(); ++i) {
    if (pair.a(i) == 0.0) continue;
    if (pair.b(i) == 0.0) throw Error(Errc::SupportViolation, "psi_a charges a psi_b-null state");
    acc += pair.a(i) * std::log(pair.a(i) / pair.b(i));
  }
  return acc;
}

namespace {

double scalar_at(const LagSeries& s, int t) { return s.at(t)(0, 0); }

double cross_power_at_zero(const LagSeries& sigma_s, const LagSeries& sigma_zeta) {
  const int lo = std::max(sigma_s.lag_min, sigma_zeta.lag_min);
  const int hi = std::min(sigma_s.lag_max, sigma_zeta.lag_max);
  if (lo > hi) throw Error(Errc::DimensionMismatch, "series windows do not overlap");
  double s0 = 0.0;
  for (int m = lo; m <= hi; ++m) s0 += scalar_at(sigma_s, m) * scalar_at(sigma_zeta, m);
  double edge = std::max(std::abs(scalar_at(sigma_s, lo) * scalar_at(sigma_zeta, lo)),
                         std::abs(scalar_at(sigma_s, hi) * scalar_at(sigma_zeta, hi)));
  if (edge > 1e-10 * std::max(std::abs(s0), 1e-300))
    throw Error(Errc::TailNotConverged, "S_{S x zeta}(0) tail above 1e-10 of the total");
  return s0;
}

}  // namespace

MiBound mi_lower_bound(const LagSeries& sigma_s_zeta, const LagSeries& sigma_s,
                       const LagSeries& sigma_zeta, int n_lo, int n_hi) {
  if (n_lo > n_hi) throw Error(Errc::InvalidInput, "empty n range");
  if (!sigma_s_zeta.contains(n_lo) || !sigma_s_zeta.contains(n_hi))
    throw Error(Errc::LagTooLarge, "cross series does not cover the n range");
  double s0 = cross_power_at_zero(sigma_s, sigma_zeta);
  if (s0 <= 0.0) return MiBound{0.0, n_lo};
  MiBound best{-1.0, n_lo};
  for (int n = n_lo; n <= n_hi; ++n) {
    double num = scalar_at(sigma_s_zeta, n);
    double v = 0.5 * num * num / s0;
    if (v > best.value) best = MiBound{v, n};
  }
  return best;
}

double mi_lower_bound_filtered(const LagSeries& sigma_s_zeta, const LagSeries& sigma_s,
                               const LagSeries& sigma_zeta, const Vector& alpha,
                               const Vector& beta) {
  if (alpha.size() != beta.size() || alpha.size() < 1)
    throw Error(Errc::DimensionMismatch, "filters must share a length >= 1");
  const int n = static_cast<int>(alpha.size()) - 1;
  auto filtered = [&](const LagSeries& s, const Vector& u, const Vector& v, int t) {
    double acc = 0.0;
    for (int m = 0; m <= n; ++m)
      for (int mp = 0; mp <= n; ++mp) acc += u(m) * v(mp) * scalar_at(s, t + m - mp);
    return acc;
  };
  // numerator Sigma_{S^alpha, zeta^beta}(0)
  double num = filtered(sigma_s_zeta, alpha, beta, 0);
  // denominator sum_t Sigma_{S^alpha}(t) Sigma_{zeta^beta}(t)
  const int lo = std::max(sigma_s.lag_min, sigma_zeta.lag_min) + n;
  const int hi = std::min(sigma_s.lag_max, sigma_zeta.lag_max) - n;
  if (lo > hi) throw Error(Errc::LagTooLarge, "series too short for the filter length");
  double den = 0.0;
  for (int t = lo; t <= hi; ++t)
    den += filtered(sigma_s, alpha, alpha, t) * filtered(sigma_zeta, beta, beta, t);
  if (den <= 0.0) return 0.0;
  return 0.5 * num * num / den;
}

}  // namespace perturbmc
