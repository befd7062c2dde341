#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "perturbmc/oracle.hpp"
#include "perturbmc/simulate.hpp"
#include "perturbmc/stats.hpp"
#include "perturbmc/timing_channel.hpp"
#include "test_util.hpp"

using namespace perturbmc;
using perturbmc::testing::max_abs;

namespace {

QueueModel queue() { return build_queue_model(0.9, 18); }

}  // namespace

TEST_CASE("sample_row boundaries") {
  std::vector<double> point{1.0, 0.0, 0.0};
  CHECK(sample_row(point, 0.0) == 0);
  CHECK(sample_row(point, 0.999999) == 0);

  std::vector<double> two{0.3, 0.7};
  CHECK(sample_row(two, 0.29) == 0);
  CHECK(sample_row(two, 0.30) == 1);

  // queue rows: u below lambda (1 + zeta) lands on the arrival target
  QueueModel qm = queue();
  double zeta = 0.25;
  Matrix Pz = qm.family.evaluate(zeta);
  double a = qm.lambda * (1.0 + zeta);
  int src = qm.index(4, 1);
  std::vector<double> row(38);
  for (int j = 0; j < 38; ++j) row[static_cast<size_t>(j)] = Pz(src, j);
  CHECK(sample_row(row, a - 1e-12) == qm.index(5, 0));
  CHECK(sample_row(row, a + 1e-12) == qm.index(3, 1));
}

TEST_CASE("uniform streams are deterministic and distinct") {
  UniformStream a(42, 0), b(42, 0), c(42, 1);
  bool all_equal = true;
  for (int i = 0; i < 100; ++i) {
    double x = a.next(), y = b.next(), z = c.next();
    CHECK(x == y);
    if (x != z) all_equal = false;
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK_FALSE(all_equal);
}

TEST_CASE("coupled simulation: eps = 0 keeps the chains identical") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.0);
  CoupledPath path = simulate_coupled(qm.family, in, 5000, 9, 1000);
  for (long t = 0; t < path.length(); ++t) CHECK(path.x[t] == path.x_bullet[t]);
}

TEST_CASE("coupled simulation replays deterministically") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.2);
  CoupledPath p1 = simulate_coupled(qm.family, in, 3000, 1234, 500);
  CoupledPath p2 = simulate_coupled(qm.family, in, 3000, 1234, 500);
  CHECK(p1.x == p2.x);
  CHECK(p1.x_bullet == p2.x_bullet);
  CHECK(p1.zeta_state == p2.zeta_state);
  CoupledPath p3 = simulate_coupled(qm.family, in, 3000, 1235, 500);
  CHECK(p1.x != p3.x);
}

TEST_CASE("signed formal inputs cannot be simulated") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.8, 0.2);
  try {
    simulate_coupled(qm.family, in, 100, 1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotSimulable);
  }
}

TEST_CASE("deterministic family has zero innovations") {
  // each row a point mass: a 3-cycle
  Matrix P(3, 3);
  P << 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0;
  ControlledFamily fam = make_family(validate_stochastic(P), Matrix::Zero(3, 3),
                                     Matrix::Zero(3, 3), nullptr, -1.0, 1.0);
  InputSpec in = three_state_input(0.4, 0.0);
  CoupledPath path = simulate_coupled(fam, in, 500, 3, 100);
  for (const Vector& d : extract_delta(path, fam, in)) CHECK(max_abs(Matrix(d)) == 0.0);
}

TEST_CASE("queue-model innovations sum to zero exactly") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.3);
  CoupledPath path = simulate_coupled(qm.family, in, 10000, 5, 1000);
  for (const Vector& d : extract_delta(path, qm.family, in)) {
    double s = 0.0;
    for (int j = 0; j < d.size(); ++j) s += d(j);
    CHECK(s == 0.0);
  }
}

TEST_CASE("martingale diagnostics at moderate length") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.3);
  CoupledPath path = simulate_coupled(qm.family, in, 200000, 2024);
  MartingaleStats ms = martingale_stats(path, qm.family, in, 3, 3);

  AggregateCheck mean_check =
      studentized_aggregate(ms.delta_mean.mean.at(0), ms.delta_mean.se.at(0));
  CHECK(mean_check.pass);
  for (int k = -3; k <= 3; ++k) {
    AggregateCheck c =
        studentized_aggregate(ms.r_delta_zeta.mean.at(k), ms.r_delta_zeta.se.at(k));
    CHECK(c.pass);
  }
  for (int t = 1; t <= 3; ++t) {
    AggregateCheck c = studentized_aggregate(ms.r_delta.mean.at(t), ms.r_delta.se.at(t));
    CHECK(c.pass);
  }
  // Sigma^Delta against the exact oracle value
  JointChain jc = build_joint(qm.family, in);
  DeltaStats ds = exact_delta_stats(jc, qm.family, 0);
  AggregateCheck sd =
      studentized_aggregate(ms.r_delta.mean.at(0) - ds.sigma_delta, ms.r_delta.se.at(0));
  CHECK(sd.pass);
}

TEST_CASE("nominal chain occupation matches pi0") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.3);
  CoupledPath path = simulate_coupled(qm.family, in, 200000, 77);
  const int d = qm.family.dim();
  // batch means of the occupation indicators
  const int nb = 100;
  std::vector<Vector> counts(nb, Vector::Zero(d));
  long per = path.length() / nb;
  for (long t = 0; t < per * nb; ++t) counts[static_cast<size_t>(t / per)](path.x_bullet[t]) += 1.0;
  Vector mean = Vector::Zero(d);
  for (auto& c : counts) mean += c / double(per);
  mean /= nb;
  Matrix se = Matrix::Zero(d, 1);
  for (auto& c : counts) {
    Vector m = c / double(per);
    se.col(0) += (m - mean).cwiseProduct(m - mean);
  }
  se = (se / nb / (nb - 1)).cwiseSqrt();
  Vector pi0 = stationary_distribution(qm.family.P0).p;
  AggregateCheck c = studentized_aggregate(mean - pi0, se, 1e-9);
  CHECK(c.pass);
}

TEST_CASE("empirical correlation basics") {
  std::vector<Vector> ones(1000, Vector::Ones(1));
  EmpiricalSeries r = empirical_corr(ones, ones, -2, 2, 10);
  for (int t = -2; t <= 2; ++t) {
    CHECK(r.mean.at(t)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.se.at(t)(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(empirical_corr(ones, ones, -600, 600, 10), Error);
}

TEST_CASE("empirical input autocovariance matches the model") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.3);
  CoupledPath path = simulate_coupled(qm.family, in, 200000, 31);
  std::vector<Vector> z(path.length(), Vector::Zero(1));
  for (long t = 0; t < path.length(); ++t)
    z[static_cast<size_t>(t)](0) = in.epsilon * in.states(path.zeta_state[t]);
  EmpiricalSeries r = empirical_corr(z, z, 0, 5, 100);
  for (int t = 0; t <= 5; ++t) {
    double expect = input_autocov_scaled(in, t);
    AggregateCheck c = studentized_aggregate(r.mean.at(t).array() - expect, r.se.at(t));
    CHECK(c.pass);
  }
}

TEST_CASE("empirical R_D_zeta matches the second-order prediction") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.3);
  SecondOrderContext ctx = make_context(qm.family, in);
  CoupledPath path = simulate_coupled(qm.family, in, 200000, 4242);
  // D_t = Gamma_t - Gamma_{t-1} P0, exact for the affine queue family
  const long T = path.length();
  std::vector<Vector> D(static_cast<size_t>(T - 1));
  std::vector<Vector> z(static_cast<size_t>(T - 1), Vector::Zero(1));
  for (long t = 0; t + 1 < T; ++t) {
    Vector d = -qm.family.P0.P.row(path.x[static_cast<size_t>(t)]).transpose();
    d(path.x[static_cast<size_t>(t + 1)]) += 1.0;
    D[static_cast<size_t>(t)] = std::move(d);
    // zeta at the D-sequence's time origin: D index s holds D_{s+1}
    z[static_cast<size_t>(t)](0) = in.epsilon * in.states(path.zeta_state[static_cast<size_t>(t + 1)]);
  }
  EmpiricalSeries emp = empirical_corr(D, z, 0, 2, 100);
  for (int t = 0; t <= 2; ++t) {
    // E[D_{s+t}^T zeta_s] with D index shift: prediction R_{D,zeta}(t)
    Vector predicted = r_d_zeta(ctx, t);
    AggregateCheck c = studentized_aggregate(emp.mean.at(t) - predicted, emp.se.at(t));
    CHECK(c.pass);
  }
}

TEST_CASE("coupling rates: parallel equals serial, sane values") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.1);
  std::vector<double> eps{0.0, 0.1, 0.2};
  auto par = coupling_rate(qm.family, in, eps, 50000, 11);
  auto ser = coupling_rate_serial(qm.family, in, eps, 50000, 11);
  for (size_t i = 0; i < eps.size(); ++i) {
    CHECK(par[i].rate == ser[i].rate);
    CHECK(par[i].se == ser[i].se);
  }
  CHECK(par[0].rate == 0.0);
  CHECK(par[1].rate > 0.0);
  CHECK(par[2].rate > 0.0);
  CHECK(par[2].rate <= 2.0 * par[1].rate + 3.0 * (2.0 * par[1].se + par[2].se));
}

TEST_CASE("path export records the seed") {
  QueueModel qm = queue();
  InputSpec in = three_state_input(0.4, 0.2);
  CoupledPath path = simulate_coupled(qm.family, in, 50, 99, 10);
  export_path_csv(path, in, "/tmp/perturbmc_path.csv");
  std::ifstream is("/tmp/perturbmc_path.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "# seed=99 burn_in=10");
  std::getline(is, line);
  CHECK(line == "t,x,x_bullet,zeta1");
}
