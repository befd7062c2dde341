#include "perturbmc/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace perturbmc {

namespace {

void require_zero_row_sums(const Matrix& M, const char* name, double tol) {
  for (int i = 0; i < M.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < M.cols(); ++j) s += M(i, j);
    if (std::abs(s) > tol)
      throw Error(Errc::InvalidInput, std::string(name) + " row " + std::to_string(i) +
                                          " sums to " + std::to_string(s));
  }
}

void project_rows_zero_sum(Matrix& M) {
  for (int i = 0; i < M.rows(); ++i) {
    double mean = M.row(i).sum() / M.cols();
    M.row(i).array() -= mean;
  }
}

}  // namespace

ControlledFamily make_family(StochasticMatrix P0, Matrix E, Matrix W, Evaluator evaluate,
                             double zeta_min, double zeta_max) {
  const int d = P0.dim;
  if (E.rows() != d || E.cols() != d || W.rows() != d || W.cols() != d)
    throw Error(Errc::DimensionMismatch, "derivative dimensions do not match P0");
  require_zero_row_sums(E, "E", 1e-10);
  require_zero_row_sums(W, "W", 1e-10);
  if (zeta_min > 0.0 || zeta_max < 0.0)
    throw Error(Errc::InvalidZetaDomain, "domain must contain zeta = 0");
  if (evaluate) {
    Matrix at0 = evaluate(0.0);
    if ((at0 - P0.P).cwiseAbs().maxCoeff() > 1e-14)
      throw Error(Errc::InvalidInput, "evaluate(0) differs from P0");
  } else {
    // default: the quadratic family itself
    Matrix P0m = P0.P, Em = E, Wm = W;
    evaluate = [P0m, Em, Wm](double z) { return Matrix(P0m + z * Em + 0.5 * z * z * Wm); };
  }
  return ControlledFamily{std::move(P0), std::move(E), std::move(W), std::move(evaluate),
                          zeta_min, zeta_max};
}

ControlledFamily taylor_from_evaluator(Evaluator evaluate, double zeta_min, double zeta_max,
                                       double h) {
  if (!(zeta_min <= -h && zeta_max >= h))
    throw Error(Errc::DomainTooSmall, "need [-h, h] inside the zeta domain, h = " + std::to_string(h));
  StochasticMatrix P0 = validate_stochastic(evaluate(0.0));
  Matrix Ph = evaluate(h), Pmh = evaluate(-h);
  Matrix E = (Ph - Pmh) / (2.0 * h);
  Matrix W = (Ph - 2.0 * P0.P + Pmh) / (h * h);
  project_rows_zero_sum(E);
  project_rows_zero_sum(W);
  return make_family(std::move(P0), std::move(E), std::move(W), std::move(evaluate), zeta_min,
                     zeta_max);
}

InputSpec make_input(Vector states, Matrix K, double epsilon) {
  const int n = static_cast<int>(states.size());
  if (n < 1 || K.rows() != n || K.cols() != n)
    throw Error(Errc::DimensionMismatch, "input alphabet and K disagree");
  if (epsilon < 0.0 || epsilon > 1.0)
    throw Error(Errc::InvalidInput, "epsilon must lie in [0, 1]");
  for (int i = 0; i < n; ++i)
    if (std::abs(states(i)) > 1.0)
      throw Error(Errc::InvalidInput, "|z_i| <= 1 required, got " + std::to_string(states(i)));
  require_unit_row_sums(K);
  InputSpec in;
  in.states = std::move(states);
  in.K = std::move(K);
  in.epsilon = epsilon;
  in.simulable = (in.K.minCoeff() >= 0.0);
  in.mu = (n == 1) ? Vector::Ones(1) : stationary_of_matrix(in.K);
  double mean = in.mu.dot(in.states);
  if (std::abs(mean) > 1e-12)
    throw Error(Errc::InvalidInput, "stationary mean " + std::to_string(mean) + " is not zero");
  try {
    in.geom = geometric_representation(in);
  } catch (const Error& e) {
    if (e.code() != Errc::NonGeometricCovariance) throw;
    in.geom.reset();  // lag-domain fallback
  }
  return in;
}

namespace {

double autocov_by_iteration(const InputSpec& in, long t) {
  const long n = std::labs(t);
  Vector y = in.states;
  for (long k = 0; k < n; ++k) y = in.K * y;
  return (in.mu.array() * in.states.array()).matrix().dot(y);
}

}  // namespace

double input_autocovariance(const InputSpec& in, long t) {
  if (in.geom) {
    double s = 0.0;
    const long n = std::labs(t);
    for (int k = 0; k < in.geom->poles.size(); ++k) {
      double p = (n == 0) ? 1.0 : std::pow(in.geom->poles(k), static_cast<double>(n));
      s += in.geom->coeffs(k) * p;
    }
    return s;
  }
  return autocov_by_iteration(in, t);
}

double input_autocov_scaled(const InputSpec& in, long t) {
  return in.epsilon * in.epsilon * input_autocovariance(in, t);
}

GeometricCovariance geometric_representation(const InputSpec& in) {
  const int n = in.n_states();
  if (n == 1) {
    GeometricCovariance g;
    g.coeffs = Vector::Zero(1);
    g.poles = Vector::Zero(1);
    return g;
  }
  Eigen::EigenSolver<Matrix> es(in.K);
  if (es.info() != Eigen::Success)
    throw Error(Errc::NonGeometricCovariance, "eigendecomposition failed");
  Eigen::VectorXcd evals = es.eigenvalues();
  Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::MatrixXcd Vinv;
  {
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
    if (!lu.isInvertible())
      throw Error(Errc::NonGeometricCovariance, "K is not diagonalizable");
    Vinv = lu.inverse();
  }
  Eigen::VectorXcd w = (in.mu.array() * in.states.array()).matrix().cast<std::complex<double>>();
  Eigen::VectorXcd zc = in.states.cast<std::complex<double>>();
  const double sigma2 = autocov_by_iteration(in, 0);
  const double active_tol = 1e-12 * std::max(1.0, sigma2);

  std::vector<std::pair<double, double>> terms;  // (pole, coeff)
  for (int k = 0; k < n; ++k) {
    std::complex<double> c = (w.transpose() * V.col(k)).value() * (Vinv.row(k) * zc).value();
    if (std::abs(c) <= active_tol) continue;
    if (std::abs(c.imag()) > 1e-10 * std::max(1.0, std::abs(c.real())) ||
        std::abs(evals(k).imag()) > 1e-10)
      throw Error(Errc::NonGeometricCovariance, "complex active pole");
    double rho = evals(k).real();
    if (std::abs(rho) >= 1.0)
      throw Error(Errc::NonGeometricCovariance, "active pole on or outside the unit circle");
    terms.emplace_back(rho, c.real());
  }
  if (terms.empty()) terms.emplace_back(0.0, 0.0);
  std::sort(terms.begin(), terms.end());
  // merge numerically identical poles, reject merely close ones
  std::vector<std::pair<double, double>> merged;
  for (auto& t : terms) {
    if (!merged.empty() && std::abs(t.first - merged.back().first) < 1e-12)
      merged.back().second += t.second;
    else
      merged.push_back(t);
  }
  for (size_t i = 1; i < merged.size(); ++i)
    if (std::abs(merged[i].first - merged[i - 1].first) < 1e-8)
      throw Error(Errc::NonGeometricCovariance, "repeated poles");

  GeometricCovariance g;
  g.poles = Vector(merged.size());
  g.coeffs = Vector(merged.size());
  for (size_t i = 0; i < merged.size(); ++i) {
    g.poles(static_cast<int>(i)) = merged[i].first;
    g.coeffs(static_cast<int>(i)) = merged[i].second;
  }
  // reconstruction must reproduce the lag-domain autocovariance
  for (long t = 0; t <= 50; ++t) {
    double recon = 0.0;
    for (int k = 0; k < g.poles.size(); ++k)
      recon += g.coeffs(k) * ((t == 0) ? 1.0 : std::pow(g.poles(k), static_cast<double>(t)));
    if (std::abs(recon - autocov_by_iteration(in, t)) > 1e-9)
      throw Error(Errc::NonGeometricCovariance, "reconstruction mismatch at lag " + std::to_string(t));
  }
  return g;
}

double input_psd(const InputSpec& in, double theta) {
  if (in.geom) {
    double s = 0.0;
    for (int k = 0; k < in.geom->poles.size(); ++k) {
      double rho = in.geom->poles(k);
      s += in.geom->coeffs(k) * (1.0 - rho * rho) /
           (1.0 - 2.0 * rho * std::cos(theta) + rho * rho);
    }
    return s;
  }
  // truncated symmetric sum with geometric-tail detection
  double s = input_autocovariance(in, 0);
  double scale = std::max(std::abs(s), 1e-300);
  long t = 1;
  double prev = scale;
  int rising = 0;
  for (; t <= 100000; ++t) {
    double r = input_autocovariance(in, t);
    s += 2.0 * r * std::cos(theta * t);
    double a = std::abs(r);
    if (a < 1e-16 * scale) return s;
    rising = (a > prev) ? rising + 1 : 0;
    if (rising > 50) break;
    prev = a;
  }
  throw Error(Errc::TailNotSummable, "input autocovariance tail does not decay");
}

}  // namespace perturbmc
