#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>

#include "perturbmc/oracle.hpp"
#include "perturbmc/timing_channel.hpp"
#include "test_util.hpp"

using namespace perturbmc;
using perturbmc::testing::max_abs;

namespace {

QueueModel queue() { return build_queue_model(0.9, 18); }

JointChain queue_joint(double gamma, double eps) {
  QueueModel qm = queue();
  return build_joint(qm.family, three_state_input(gamma, eps));
}

}  // namespace

TEST_CASE("joint chain dimensions and stationarity") {
  JointChain jc = queue_joint(0.4, 0.3);
  CHECK(jc.n_states() == 114);  // 6 (1 + q_bar)
  CHECK(((jc.P.transpose() * jc.pi - jc.pi).cwiseAbs()).maxCoeff() < 1e-10);
  CHECK(jc.pi.sum() == doctest::Approx(1.0).epsilon(1e-12));

  // z-marginal equals the input stationary pmf
  for (int z = 0; z < 3; ++z) {
    double m = 0.0;
    for (int x = 0; x < jc.d; ++x) m += jc.pi(jc.flat(x, z));
    CHECK(m == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  }
}

TEST_CASE("joint chain with a single constant input state is the base chain") {
  QueueModel qm = queue();
  Vector states(1);
  states << 0.0;
  Matrix K = Matrix::Ones(1, 1);
  InputSpec in = make_input(states, K, 0.0);
  JointChain jc = build_joint(qm.family, in);
  CHECK(max_abs(jc.P - qm.family.P0.P) == 0.0);
}

TEST_CASE("eps = 0 marginal reproduces the nominal stationary law") {
  JointChain jc = queue_joint(0.4, 0.0);
  Vector marg = exact_marginal(jc);
  double kappa = (1.0 - 0.9) / (1.0 - std::pow(0.9, 19));
  for (int n = 0; n <= 18; ++n)
    CHECK(marg(n) + marg(n + 19) == doctest::Approx(kappa * std::pow(0.9, n)).epsilon(1e-9));
  CHECK(marg.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zeta domain violations are rejected") {
  QueueModel qm = queue();
  Vector states(2);
  states << -1.0, 1.0;
  Matrix K(2, 2);
  K << 0.5, 0.5, 0.5, 0.5;
  InputSpec in = make_input(states, K, 1.0);
  ControlledFamily narrow = make_family(qm.family.P0, qm.family.E, qm.family.W,
                                        qm.family.evaluate, -0.5, 0.5);
  CHECK_THROWS_AS(build_joint(narrow, in), Error);
}

TEST_CASE("exact cross correlations") {
  JointChain jc = queue_joint(0.4, 0.3);
  Vector ones = Vector::Ones(jc.n_states());
  for (long t : {-3L, 0L, 4L})
    CHECK(exact_cross_corr(jc, ones, ones, t) == doctest::Approx(1.0).epsilon(1e-12));

  Vector zeta = input_observable(jc);
  for (long t : {0L, 1L, 3L, -2L})
    CHECK(exact_cross_corr(jc, zeta, zeta, t) ==
          doctest::Approx(0.09 * (2.0 / 3.0) * std::pow(0.6, std::abs(t))).epsilon(1e-10));

  // swap symmetry with asymmetric observables
  Vector f = Vector::Zero(jc.n_states());
  f(jc.flat(3, 1)) = 1.0;
  for (long t : {1L, 2L, 5L})
    CHECK(exact_cross_corr(jc, f, zeta, t) ==
          doctest::Approx(exact_cross_corr(jc, zeta, f, -t)).epsilon(1e-12));
}

TEST_CASE("gamma correlations agree with the generic cross correlation") {
  JointChain jc = queue_joint(0.4, 0.3);
  Vector zeta = input_observable(jc);
  Vector nu2 = exact_gamma_zeta_corr(jc, 2);
  Vector nu_m2 = exact_gamma_zeta_corr(jc, -2);
  for (int i : {0, 5, 20, 37}) {
    Vector ind = Vector::Zero(jc.n_states());
    for (int z = 0; z < 3; ++z) ind(jc.flat(i, z)) = 1.0;
    CHECK(nu2(i) == doctest::Approx(exact_cross_corr(jc, ind, zeta, 2)).epsilon(1e-12));
    CHECK(nu_m2(i) == doctest::Approx(exact_cross_corr(jc, zeta, ind, 2)).epsilon(1e-12));
  }
  Matrix R1 = exact_gamma_corr(jc, 1);
  // column sums: sum_i P(X_1 = i, X_0 = j) = P(X_0 = j)
  Vector marg = exact_marginal(jc);
  CHECK(max_abs(Matrix((R1.colwise().sum() - marg.transpose()))) < 1e-12);
  CHECK(max_abs(exact_gamma_corr(jc, -1) - R1.transpose()) == 0.0);
}

TEST_CASE("independence of the nominal chain from the input at eps = 0") {
  JointChain jc = queue_joint(0.4, 0.0);
  // unscaled zeta^1 observable
  Vector z1(jc.n_states());
  Vector vals(3);
  vals << -1.0, 0.0, 1.0;
  for (int x = 0; x < jc.d; ++x)
    for (int z = 0; z < 3; ++z) z1(jc.flat(x, z)) = vals(z);
  Vector f = Vector::Zero(jc.n_states());
  for (int z = 0; z < 3; ++z) f(jc.flat(7, z)) = 1.0;
  for (long t : {-2L, 0L, 2L}) CHECK(std::abs(exact_cross_corr(jc, f, z1, t)) < 1e-12);
}

TEST_CASE("exact delta statistics") {
  QueueModel qm = queue();
  JointChain jc0 = queue_joint(0.4, 0.0);
  DeltaStats ds0 = exact_delta_stats(jc0, qm.family, 2);
  Vector pi0 = stationary_distribution(qm.family.P0).p;
  Matrix nominal = Matrix(pi0.asDiagonal()) - qm.family.P0.P.transpose() *
                                                  Matrix(pi0.asDiagonal()) * qm.family.P0.P;
  CHECK(max_abs(ds0.sigma_delta - nominal) < 1e-12);
  for (int t = 0; t <= 2; ++t) CHECK(max_abs(ds0.r_delta2_zeta.at(-t)) < 1e-15);

  JointChain jc = queue_joint(0.4, 0.3);
  DeltaStats ds = exact_delta_stats(jc, qm.family, 2);
  // covariance: symmetric, eigenvalues >= -1e-10
  CHECK(max_abs(ds.sigma_delta - ds.sigma_delta.transpose()) < 1e-14);
  Eigen::SelfAdjointEigenSolver<Matrix> es(ds.sigma_delta);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
  // trace is a mean of per-state variances, hence nonnegative
  CHECK(ds.sigma_delta.trace() >= 0.0);
}

TEST_CASE("exact psd: flat for an iid joint chain and Parseval-consistent") {
  // iid chain, constant input
  Vector pv(4);
  pv << 0.1, 0.2, 0.3, 0.4;
  Matrix iid = Vector::Ones(4) * pv.transpose();
  ControlledFamily fam = make_family(validate_stochastic(iid), Matrix::Zero(4, 4),
                                     Matrix::Zero(4, 4), nullptr, -1.0, 1.0);
  Vector states(1);
  states << 0.0;
  InputSpec in = make_input(states, Matrix::Ones(1, 1), 0.0);
  JointChain jc = build_joint(fam, in);
  Vector f(4);
  f << 1.0, 2.0, -1.0, 0.5;
  Vector fj = lift_observable(jc, f);
  SpectralGrid g = exact_psd(jc, fj, fj, 33);
  double mean = jc.pi.dot(fj);
  double var = jc.pi.dot(fj.cwiseProduct(fj)) - mean * mean;
  for (auto& v : g.values) CHECK(std::abs(v(0, 0) - var) < 1e-12);

  // Parseval against the lag-domain series on the queue chain
  JointChain q = queue_joint(0.4, 0.3);
  Vector dep = lift_observable(q, build_queue_model(0.9, 18).departure_indicator());
  SpectralGrid Sq = exact_psd(q, dep, dep, 4097);
  LagSeries sig = exact_sigma_series(q, dep, dep, 600);
  double lag_sum = 0.0;
  for (int t = -600; t <= 600; ++t) lag_sum += sig.at(t)(0, 0);
  // S(0) equals the two-sided sum of covariances
  CHECK(Sq.values[2048](0, 0).real() == doctest::Approx(lag_sum).epsilon(1e-8));
  CHECK(parseval_trace(Sq) == doctest::Approx(sig.at(0)(0, 0)).epsilon(1e-6));
}

TEST_CASE("exact psd parallel equals serial bitwise") {
  JointChain jc = queue_joint(0.4, 0.3);
  Vector dep = lift_observable(jc, build_queue_model(0.9, 18).departure_indicator());
  Vector zeta = input_observable(jc);
  SpectralGrid a = exact_psd(jc, dep, zeta, 65);
  SpectralGrid b = exact_psd_serial(jc, dep, zeta, 65);
  for (int m = 0; m < a.size(); ++m)
    CHECK(std::abs(a.values[m](0, 0) - b.values[m](0, 0)) == 0.0);
}

TEST_CASE("exact R_D assembly is consistent with the gamma correlations") {
  QueueModel qm = queue();
  JointChain jc = queue_joint(0.4, 0.2);
  const Matrix& P0 = qm.family.P0.P;
  Matrix rd0 = exact_r_d(jc, P0, 0);
  CHECK(max_abs(rd0 - rd0.transpose()) < 1e-12);
  CHECK(max_abs(exact_r_d(jc, P0, -2) - exact_r_d(jc, P0, 2).transpose()) < 1e-12);
  // R_D rows/columns annihilate 1 (the deviation input sums to zero)
  CHECK(max_abs(Matrix(rd0 * Vector::Ones(38))) < 1e-12);
  Vector rdz = exact_r_d_zeta(jc, P0, 1);
  CHECK(std::abs(rdz.sum()) < 1e-12);
}

TEST_CASE("joint chain export") {
  namespace fs = std::filesystem;
  JointChain jc = queue_joint(0.4, 0.1);
  export_joint_csv(jc, "/tmp/perturbmc_pjoint.csv", "/tmp/perturbmc_pijoint.csv");
  CHECK(fs::file_size("/tmp/perturbmc_pjoint.csv") > 1000);
  CHECK(fs::file_size("/tmp/perturbmc_pijoint.csv") > 100);
}
