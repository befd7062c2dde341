#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "perturbmc/oracle.hpp"
#include "perturbmc/second_order.hpp"
#include "perturbmc/timing_channel.hpp"
#include "test_util.hpp"

using namespace perturbmc;
using perturbmc::testing::max_abs;

namespace {

SecondOrderContext queue_ctx(double gamma, double eps) {
  QueueModel qm = build_queue_model(0.9, 18);
  return make_context(qm.family, three_state_input(gamma, eps));
}

// exactly quadratic 3-state family with W != 0
ControlledFamily quadratic_family() {
  Matrix P0(3, 3), E(3, 3), W(3, 3);
  P0 << 0.6, 0.2, 0.2, 0.15, 0.7, 0.15, 0.25, 0.25, 0.5;
  E << -0.10, 0.05, 0.05, 0.10, -0.10, 0.00, 0.00, 0.05, -0.05;
  W << -0.04, 0.02, 0.02, 0.02, -0.04, 0.02, 0.00, 0.04, -0.04;
  return make_family(validate_stochastic(P0), E, W, nullptr, -0.9, 0.9);
}

}  // namespace

TEST_CASE("eps = 0 degeneracies") {
  SecondOrderContext ctx = queue_ctx(0.4, 0.0);
  CHECK(max_abs(cross_corr_gamma_zeta(ctx, 0)) == 0.0);
  CHECK(max_abs(xi_vector(ctx)) == 0.0);
  CHECK((steady_state_mean_approx(ctx) - ctx.pi0).cwiseAbs().maxCoeff() == 0.0);
  Matrix nominal = delta_covariance_nominal(ctx);
  CHECK(max_abs(delta_covariance(ctx) - nominal) == 0.0);
  CHECK(max_abs(r_d(ctx, 0) - nominal) == 0.0);
  CHECK(max_abs(r_d(ctx, 1)) == 0.0);
  CHECK(max_abs(r_d_zeta(ctx, 2)) == 0.0);
  CHECK(max_abs(r_bzeta(ctx, 1)) == 0.0);
  CHECK(max_abs(r_bzeta_delta(ctx, 1)) == 0.0);
  CHECK(max_abs(r_vzeta2_delta(ctx, 1)) == 0.0);
}

TEST_CASE("iid input: R_Gamma_zeta(0) is an empty sum") {
  QueueModel qm = build_queue_model(0.9, 18);
  Vector states(2);
  states << -1.0, 1.0;
  Matrix K(2, 2);
  K << 0.5, 0.5, 0.5, 0.5;
  SecondOrderContext ctx = make_context(qm.family, make_input(states, K, 0.3));
  CHECK(max_abs(cross_corr_gamma_zeta(ctx, 0)) < 1e-15);
  // t = 1 picks up exactly the i = 1 term: eps^2 sigma^2 B
  Vector expected = 0.09 * ctx.B;
  CHECK(max_abs(cross_corr_gamma_zeta(ctx, 1) - expected) < 1e-12);
}

TEST_CASE("xi routes agree and annihilate 1") {
  SecondOrderContext ctx = queue_ctx(0.4, 0.3);
  Vector xg = xi_vector_geometric(ctx);
  Vector xl = xi_vector_lag(ctx);
  CHECK(max_abs(xg - xl) < 1e-10);
  CHECK(std::abs(xg.sum()) < 1e-9);
  Vector nu0 = cross_corr_gamma_zeta(ctx, 0);
  CHECK(std::abs(nu0.sum()) < 1e-9);

  // single-pole closed form written out by hand (queue model has W = 0)
  const int d = ctx.dim();
  double a = ctx.input.geom->coeffs(0), rho = ctx.input.geom->poles(0);
  Matrix M = (Matrix::Identity(d, d) - rho * ctx.P0()).transpose();
  Vector manual = 0.09 * a * rho *
                  (ctx.family.E.transpose() * M.partialPivLu().solve(ctx.B));
  CHECK(max_abs(xg - manual) < 1e-14);
}

TEST_CASE("pi_hat sums to one") {
  for (double eps : {0.1, 0.3, 0.7}) {
    SecondOrderContext ctx = queue_ctx(0.4, eps);
    CHECK(steady_state_mean_approx(ctx).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("Sigma_Delta is symmetric and nominal at eps = 0") {
  SecondOrderContext ctx = queue_ctx(0.4, 0.3);
  Matrix SD = delta_covariance(ctx);
  CHECK(max_abs(SD - SD.transpose()) < 1e-9);

  // iid chain at eps = 0: Pi0 - pi0 pi0^T
  Vector pv(3);
  pv << 0.2, 0.3, 0.5;
  Matrix iid = Vector::Ones(3) * pv.transpose();
  ControlledFamily fam =
      make_family(validate_stochastic(iid), Matrix::Zero(3, 3), Matrix::Zero(3, 3), nullptr,
                  -1.0, 1.0);
  Vector states(2);
  states << -1.0, 1.0;
  Matrix K(2, 2);
  K << 0.5, 0.5, 0.5, 0.5;
  SecondOrderContext c0 = make_context(fam, make_input(states, K, 0.0));
  Matrix expect = Matrix(pv.asDiagonal()) - pv * pv.transpose();
  CHECK(max_abs(delta_covariance(c0) - expect) < 1e-14);
}

TEST_CASE("r_delta2_zeta vanishes when E = 0 and is symmetric") {
  // family with E = 0, W != 0
  Matrix P0(3, 3), W(3, 3);
  P0 << 0.6, 0.2, 0.2, 0.15, 0.7, 0.15, 0.25, 0.25, 0.5;
  W << -0.04, 0.02, 0.02, 0.02, -0.04, 0.02, 0.00, 0.04, -0.04;
  ControlledFamily fam =
      make_family(validate_stochastic(P0), Matrix::Zero(3, 3), W, nullptr, -0.9, 0.9);
  SecondOrderContext ctx = make_context(fam, three_state_input(0.4, 0.3));
  CHECK(max_abs(r_delta2_zeta(ctx, 0)) < 1e-15);

  SecondOrderContext q = queue_ctx(0.4, 0.3);
  Matrix rd2 = r_delta2_zeta(q, 1);
  CHECK(max_abs(rd2 - rd2.transpose()) < 1e-12);
  CHECK_THROWS_AS(r_delta2_zeta(q, -1), Error);
}

TEST_CASE("r_bzeta values and symmetry") {
  SecondOrderContext ctx = queue_ctx(0.4, 0.3);
  Matrix t0 = r_bzeta(ctx, 0);
  Matrix manual = ctx.family.E.transpose() * Matrix(ctx.pi0.asDiagonal()) * ctx.family.E *
                  ctx.r_zeta(0);
  CHECK(max_abs(t0 - manual) == 0.0);
  for (long t : {1L, 2L, 5L}) CHECK(max_abs(r_bzeta(ctx, -t) - r_bzeta(ctx, t).transpose()) == 0.0);
}

TEST_CASE("r_bzeta_delta cases") {
  SecondOrderContext ctx = queue_ctx(0.4, 0.3);
  CHECK(max_abs(r_bzeta_delta(ctx, -3)) == 0.0);
  Matrix t0 = r_bzeta_delta(ctx, 0);
  CHECK(max_abs(t0 - ctx.family.E.transpose() * r_delta2_zeta(ctx, 0)) == 0.0);
  // t = 1 written out: E^T A R_D2z(-1) + E^T E^T R_zeta(1) Sigma_Delta_bullet
  Matrix A = ctx.P0().transpose();
  Matrix expect = ctx.family.E.transpose() * A * r_delta2_zeta(ctx, 1) +
                  ctx.family.E.transpose() * ctx.family.E.transpose() * ctx.r_zeta(1) *
                      delta_covariance_nominal(ctx);
  CHECK(max_abs(r_bzeta_delta(ctx, 1) - expect) < 1e-15);
}

TEST_CASE("r_vzeta2_delta vanishes for the affine queue and matches the quadratic family") {
  SecondOrderContext q = queue_ctx(0.4, 0.3);
  CHECK(max_abs(r_vzeta2_delta(q, 2)) == 0.0);

  SecondOrderContext ctx = make_context(quadratic_family(), three_state_input(0.4, 0.3));
  CHECK(max_abs(r_vzeta2_delta(ctx, -1)) == 0.0);
  Matrix expect = 0.5 * ctx.r_zeta(0) * ctx.family.W.transpose() * delta_covariance_nominal(ctx);
  CHECK(max_abs(r_vzeta2_delta(ctx, 0) - expect) < 1e-15);
}

TEST_CASE("R_D stationarity symmetry and series consistency") {
  for (const bool quadratic : {false, true}) {
    SecondOrderContext ctx = quadratic
                                 ? make_context(quadratic_family(), three_state_input(0.4, 0.3))
                                 : queue_ctx(0.4, 0.3);
    for (long t : {1L, 2L, 4L})
      CHECK(max_abs(r_d(ctx, -t) - r_d(ctx, t).transpose()) < 1e-15);
    LagSeries series = r_d_series(ctx, -5, 5);
    for (int t = -5; t <= 5; ++t) CHECK(max_abs(series.at(t) - r_d(ctx, t)) < 1e-13);
  }
}

TEST_CASE("r_d_zeta closed form") {
  SecondOrderContext ctx = queue_ctx(0.4, 0.3);
  CHECK(max_abs(r_d_zeta(ctx, 1) - ctx.B * ctx.r_zeta(0)) == 0.0);
  CHECK(max_abs(r_d_zeta(ctx, 2) - ctx.B * ctx.r_zeta(1)) == 0.0);
}

TEST_CASE("theta(eps^2) scaling of the second-order quantities") {
  SecondOrderContext hi = queue_ctx(0.4, 0.1);
  SecondOrderContext lo = queue_ctx(0.4, 0.05);
  double r1 = max_abs(cross_corr_gamma_zeta(hi, 0)) / max_abs(cross_corr_gamma_zeta(lo, 0));
  double r2 = max_abs(xi_vector(hi)) / max_abs(xi_vector(lo));
  double r3 = max_abs(r_bzeta(hi, 1)) / max_abs(r_bzeta(lo, 1));
  for (double r : {r1, r2, r3}) CHECK(std::abs(r - 4.0) < 0.2);
}

TEST_CASE("third-order residual contraction against the oracle") {
  // light version of the acceptance ratio test, pi_eps only
  QueueModel qm = build_queue_model(0.9, 18);
  auto residual = [&](double eps) {
    InputSpec in = three_state_input(0.4, eps);
    SecondOrderContext ctx = make_context(qm.family, in);
    JointChain jc = build_joint(qm.family, in);
    return (steady_state_mean_approx(ctx) - exact_marginal(jc)).cwiseAbs().maxCoeff();
  };
  CHECK(residual(0.1) / residual(0.2) <= 1.0 / 6.0);
}
