#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "perturbmc/model.hpp"
#include "perturbmc/timing_channel.hpp"
#include "test_util.hpp"

using namespace perturbmc;
using perturbmc::testing::max_abs;

namespace {

// direct lag-domain evaluation, independent of the geometric representation
double autocov_direct(const InputSpec& in, long t) {
  Vector y = in.states;
  for (long k = 0; k < std::labs(t); ++k) y = in.K * y;
  return (in.mu.array() * in.states.array()).matrix().dot(y);
}

InputSpec iid_input(double epsilon) {
  Vector states(2);
  states << -1.0, 1.0;
  Matrix K(2, 2);
  K << 0.5, 0.5, 0.5, 0.5;
  return make_input(states, K, epsilon);
}

}  // namespace

TEST_CASE("finite differences recover the queue derivatives") {
  QueueModel qm = build_queue_model(0.9, 18);
  ControlledFamily fd = taylor_from_evaluator(qm.family.evaluate, -1.0, 1.0);
  CHECK(max_abs(fd.E - qm.family.E) < 1e-6);
  CHECK(max_abs(fd.W) < 1e-6);  // affine family
  CHECK(max_abs(fd.E * Vector::Ones(38)) < 1e-10);
  CHECK(max_abs(fd.P0.P - qm.family.P0.P) == 0.0);
}

TEST_CASE("finite differences on a constant evaluator give E = W = 0") {
  Matrix P = perturbmc::testing::random_chain(4, 11);
  ControlledFamily fd = taylor_from_evaluator([P](double) { return P; }, -1.0, 1.0);
  CHECK(max_abs(fd.E) < 1e-12);
  CHECK(max_abs(fd.W) < 1e-8);
}

TEST_CASE("finite differences recover a genuinely quadratic family") {
  Matrix P0(3, 3), E(3, 3), W(3, 3);
  P0 << 0.6, 0.2, 0.2, 0.15, 0.7, 0.15, 0.25, 0.25, 0.5;
  E << -0.10, 0.05, 0.05, 0.10, -0.10, 0.00, 0.00, 0.05, -0.05;
  W << -0.04, 0.02, 0.02, 0.02, -0.04, 0.02, 0.00, 0.04, -0.04;
  auto evaluate = [=](double z) { return Matrix(P0 + z * E + 0.5 * z * z * W); };
  ControlledFamily fd = taylor_from_evaluator(evaluate, -0.6, 0.6);
  CHECK(max_abs(fd.E - E) < 1e-6);
  CHECK(max_abs(fd.W - W) < 1e-6);
}

TEST_CASE("taylor_from_evaluator rejects a too-small domain") {
  Matrix P = perturbmc::testing::random_chain(3, 5);
  try {
    taylor_from_evaluator([P](double) { return P; }, -1e-6, 1e-6);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DomainTooSmall);
  }
}

TEST_CASE("make_family enforces zero-row-sum derivatives") {
  Matrix P = perturbmc::testing::random_chain(3, 6);
  Matrix E = Matrix::Zero(3, 3);
  E(0, 0) = 1e-3;  // row sum violated
  CHECK_THROWS_AS(
      make_family(validate_stochastic(P), E, Matrix::Zero(3, 3), nullptr, -1.0, 1.0), Error);
}

TEST_CASE("evaluate(zeta) stays row-stochastic over the domain") {
  QueueModel qm = build_queue_model(0.9, 18);
  for (int k = 0; k <= 8; ++k) {
    double z = -1.0 + 2.0 * k / 8.0;
    CHECK_NOTHROW(validate_stochastic(qm.family.evaluate(z)));
  }
}

TEST_CASE("three-state autocovariance values") {
  InputSpec in = three_state_input(0.4, 0.5);
  CHECK(input_autocovariance(in, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(input_autocovariance(in, 2) == doctest::Approx(0.24).epsilon(1e-12));
  for (long t = -6; t <= 6; ++t)
    CHECK(input_autocovariance(in, t) == doctest::Approx(input_autocovariance(in, -t)).epsilon(1e-14));
  // scaled version carries eps^2
  CHECK(input_autocov_scaled(in, 0) == doctest::Approx(0.25 * 2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("geometric representation of the three-state chain") {
  InputSpec in = three_state_input(0.4, 0.3);
  REQUIRE(in.geom.has_value());
  REQUIRE(in.geom->poles.size() == 1);
  CHECK(in.geom->poles(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(in.geom->coeffs(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  // reconstruction matches the direct lag sums
  for (long t = 0; t <= 50; ++t)
    CHECK(std::abs(input_autocovariance(in, t) - autocov_direct(in, t)) < 1e-9);
}

TEST_CASE("iid input degenerates to a zero pole") {
  InputSpec in = iid_input(0.2);
  REQUIRE(in.geom.has_value());
  REQUIRE(in.geom->poles.size() == 1);
  CHECK(in.geom->poles(0) == 0.0);
  CHECK(in.geom->coeffs(0) == doctest::Approx(1.0).epsilon(1e-12));  // sigma^2 = 1
  CHECK(input_autocovariance(in, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(input_autocovariance(in, 3) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("asymptotic variance of the three-state chain") {
  InputSpec in = three_state_input(0.4, 1.0);
  double acc = 0.0;
  for (long t = -400; t <= 400; ++t) acc += input_autocovariance(in, t);
  CHECK(acc == doctest::Approx(8.0 / 3.0).epsilon(1e-10));
  CHECK(input_psd(in, 0.0) == doctest::Approx(8.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("zero-mean and alphabet bounds are enforced") {
  Vector states(2);
  states << 0.0, 1.0;  // nonzero stationary mean
  Matrix K(2, 2);
  K << 0.5, 0.5, 0.5, 0.5;
  try {
    make_input(states, K, 0.5);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidInput);
  }

  Vector big(2);
  big << -2.0, 2.0;
  CHECK_THROWS_AS(make_input(big, K, 0.5), Error);
}

TEST_CASE("signed formal chain (gamma > 1/2) is accepted but not simulable") {
  InputSpec in = three_state_input(0.8, 0.5);
  CHECK_FALSE(in.simulable);
  REQUIRE(in.geom.has_value());
  REQUIRE(in.geom->poles.size() == 1);
  CHECK(in.geom->poles(0) == doctest::Approx(0.2).epsilon(1e-12));
  // autocovariance still sigma^2 (1-gamma)^|t|
  for (long t = 0; t <= 30; ++t)
    CHECK(input_autocovariance(in, t) ==
          doctest::Approx((2.0 / 3.0) * std::pow(0.2, t)).epsilon(1e-9));
}
