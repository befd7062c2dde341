#include "perturbmc/spectral.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "perturbmc/parallel.hpp"

namespace perturbmc {

using Complex = std::complex<double>;

Eigen::ArrayXd uniform_theta_grid(int M) {
  if (M < 2) throw Error(Errc::InvalidInput, "grid needs at least 2 points");
  Eigen::ArrayXd th(M);
  const double pi = std::acos(-1.0);
  for (int m = 0; m < M; ++m) th(m) = -pi + 2.0 * pi * m / (M - 1);
  return th;
}

SpectralGrid SpectralGrid::zeros(int M, int rows, int cols) {
  SpectralGrid g;
  g.thetas = uniform_theta_grid(M);
  g.values.assign(static_cast<size_t>(M), CMatrix::Zero(rows, cols));
  return g;
}

SigmaSeries make_sigma_series(LagSeries sigma) {
  // edge norms must be decaying and small relative to the center
  double scale = 0.0;
  for (int t = std::max(sigma.lag_min, -2); t <= std::min(sigma.lag_max, 2); ++t)
    scale = std::max(scale, inf_norm(sigma.at(t)));
  scale = std::max(scale, 1e-300);
  auto edge_ok = [&](int dir) {
    int edge = dir > 0 ? sigma.lag_max : sigma.lag_min;
    double e = inf_norm(sigma.at(edge));
    if (e <= 1e-8 * scale) return true;
    int span = std::min(5, sigma.n_lags() - 1);
    double last = e;
    for (int k = 1; k <= span; ++k) {
      double inner = inf_norm(sigma.at(edge - dir * k));
      if (inner < last) return false;  // growing toward the edge
      last = inner;
    }
    return e < 1e-6 * scale;
  };
  if (!edge_ok(+1) || !edge_ok(-1))
    throw Error(Errc::TailNotSummable, "covariance window edges are not decaying");
  SigmaSeries out;
  double e = std::max(inf_norm(sigma.at(sigma.lag_min)), inf_norm(sigma.at(sigma.lag_max)));
  out.tail_bound = 2.0 * e;  // one geometric tail each side, ratio <= 1/2 after decay check
  out.sigma = std::move(sigma);
  return out;
}

namespace {

CMatrix fourier_at(const LagSeries& s, double theta) {
  CMatrix acc = CMatrix::Zero(s.values.front().rows(), s.values.front().cols());
  for (int t = s.lag_min; t <= s.lag_max; ++t)
    acc += s.at(t) * std::exp(Complex(0.0, -theta * t));
  return acc;
}

}  // namespace

// Blocked evaluation: one cos- and one sin-GEMM of the (M x n_lags) phase
// tables against the flattened series. Same sums as the serial reference up
// to accumulation order.
SpectralGrid psd_of_series(const SigmaSeries& series, int grid_size) {
  const LagSeries& s = series.sigma;
  const int rows = static_cast<int>(s.values.front().rows());
  const int cols = static_cast<int>(s.values.front().cols());
  const int K = rows * cols;
  const int T = s.n_lags();
  SpectralGrid g = SpectralGrid::zeros(grid_size, rows, cols);
  g.tail_budget = series.tail_bound;
  Matrix V(T, K);
  for (int t = 0; t < T; ++t)
    V.row(t) = Eigen::Map<const Vector>(s.values[static_cast<size_t>(t)].data(), K).transpose();
  Matrix C(grid_size, T), S(grid_size, T);
  for (int m = 0; m < grid_size; ++m)
    for (int t = 0; t < T; ++t) {
      double arg = -g.thetas(m) * (s.lag_min + t);
      C(m, t) = std::cos(arg);
      S(m, t) = std::sin(arg);
    }
  Matrix re = C * V;
  Matrix im = S * V;
  for (int m = 0; m < grid_size; ++m) {
    CMatrix& out = g.values[static_cast<size_t>(m)];
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r)
        out(r, c) = Complex(re(m, r + c * rows), im(m, r + c * rows));
  }
  return g;
}

SpectralGrid psd_of_series_serial(const SigmaSeries& series, int grid_size) {
  const LagSeries& s = series.sigma;
  SpectralGrid g = SpectralGrid::zeros(grid_size, static_cast<int>(s.values.front().rows()),
                                       static_cast<int>(s.values.front().cols()));
  g.tail_budget = series.tail_bound;
  for (int m = 0; m < grid_size; ++m) g.values[static_cast<size_t>(m)] = fourier_at(s, g.thetas(m));
  return g;
}

namespace {

// Per-pole recursion for S_t = sum_{i=0}^{t-1} A^{t-1-i} E^T A^i R_zeta(t-i):
// S^{(k)}_{t+1} = rho_k (A S^{(k)}_t + E^T A^t), summed with weights eps^2 a_k.
struct BzdRecursion {
  const SecondOrderContext& ctx;
  Matrix A;
  std::vector<Matrix> S_k;
  Matrix Mt;  // E^T A^t
  long t = 0;

  explicit BzdRecursion(const SecondOrderContext& c)
      : ctx(c), A(c.P0().transpose()), Mt(c.family.E.transpose()) {
    if (ctx.input.geom)
      S_k.assign(static_cast<size_t>(ctx.input.geom->poles.size()),
                 Matrix::Zero(ctx.dim(), ctx.dim()));
  }

  // sum term for the current t (call advance() to move to t+1)
  Matrix weighted_sum() const {
    const double eps2 = ctx.epsilon() * ctx.epsilon();
    Matrix out = Matrix::Zero(ctx.dim(), ctx.dim());
    for (size_t k = 0; k < S_k.size(); ++k) out += ctx.input.geom->coeffs(static_cast<int>(k)) * S_k[k];
    return eps2 * out;
  }

  void advance() {
    for (size_t k = 0; k < S_k.size(); ++k) {
      double rho = ctx.input.geom->poles(static_cast<int>(k));
      S_k[k] = rho * (A * S_k[k] + Mt);
    }
    Mt = Mt * A;
    ++t;
  }
};

}  // namespace

SigmaSeries r_d_window(const SecondOrderContext& ctx) {
  const int d = ctx.dim();
  if (ctx.epsilon() == 0.0) {
    LagSeries rd = LagSeries::zeros(-1, 1, d, d, "R_D");
    rd.at(0) = delta_covariance_nominal(ctx);
    SigmaSeries out;
    out.sigma = std::move(rd);
    return out;
  }

  const Matrix& E = ctx.family.E;
  const Matrix& W = ctx.family.W;
  const Matrix A = ctx.P0().transpose();
  const bool has_w = W.cwiseAbs().maxCoeff() != 0.0;
  const bool geometric = ctx.input.geom.has_value();
  const int cap = geometric ? 6000 : 600;

  // nu(t) evaluations need the b_i = (B^T P0^{i-1})^T family
  std::vector<Vector> cs = gamma_zeta_power_columns(ctx);
  auto nu = [&](long t) {
    Vector acc = Vector::Zero(d);
    for (size_t i = 1; i <= cs.size(); ++i)
      acc += cs[i - 1] * input_autocovariance(ctx.input, t - static_cast<long>(i));
    return Vector(ctx.epsilon() * ctx.epsilon() * acc);
  };

  const Matrix SDb = delta_covariance_nominal(ctx);
  const Matrix SD = delta_covariance(ctx);
  const Matrix EX1 = [&] {
    Matrix M = A * Matrix(ctx.pi0.asDiagonal()) * E;
    return Matrix(Matrix(ctx.B.asDiagonal()) - (M + M.transpose()));
  }();
  const Matrix Pi0 = ctx.pi0.asDiagonal();

  std::vector<Matrix> rbz_pos, rbzd, rv;  // t = 0,1,2,...
  BzdRecursion rec(ctx);
  Matrix Mt = E.transpose();  // E^T A^t
  Matrix Nt = W.transpose();
  double scale = 0.0;
  int L = 0;
  for (int t = 0;; ++t) {
    if (t > cap)
      throw Error(Errc::TailNotSummable, "R_D window exceeded " + std::to_string(cap) + " lags");
    // R_{B zeta}(t) = E^T A^t Pi0 E R_zeta(t)
    rbz_pos.push_back(Mt * Pi0 * E * ctx.r_zeta(t));
    // R_{B zeta, Delta}(t)
    Vector nu_t = nu(-t - 1);
    Matrix rd2 = Matrix(Vector(A * nu_t).asDiagonal()) - A * Matrix(nu_t.asDiagonal()) * ctx.P0() +
                 ctx.r_zeta(t + 1) * EX1;
    Matrix sum_term;
    if (t == 0) {
      sum_term = Matrix::Zero(d, d);
    } else if (geometric) {
      sum_term = E.transpose() * rec.weighted_sum() * SDb;
    } else {
      // direct sum; the cap keeps this O(cap^2) path small
      Matrix s = Matrix::Zero(d, d);
      std::vector<Matrix> Apow(static_cast<size_t>(t));
      Apow[0] = Matrix::Identity(d, d);
      for (int k = 1; k < t; ++k) Apow[static_cast<size_t>(k)] = A * Apow[static_cast<size_t>(k - 1)];
      Matrix EtAi = E.transpose();
      for (int i = 0; i < t; ++i) {
        s += Apow[static_cast<size_t>(t - 1 - i)] * EtAi * ctx.r_zeta(t - i);
        EtAi = EtAi * A;
      }
      sum_term = E.transpose() * s * SDb;
    }
    rbzd.push_back(Mt * rd2 + sum_term);
    if (has_w)
      rv.push_back(0.5 * ctx.r_zeta(0) * Nt * SDb);
    else
      rv.push_back(Matrix::Zero(d, d));

    double norm_t = std::max({inf_norm(rbz_pos.back()), inf_norm(rbzd.back()),
                              inf_norm(rv.back())});
    if (t <= 5) scale = std::max(scale, norm_t);
    L = t;
    if (t > 5 && norm_t < 1e-13 * std::max(scale, 1e-300)) break;

    if (geometric) rec.advance();
    Mt = Mt * A;
    if (has_w) Nt = Nt * A;
  }

  // assemble R_D over [-L-1, L+1]
  LagSeries rd = LagSeries::zeros(-(L + 1), L + 1, d, d, "R_D");
  auto rbz = [&](int t) -> Matrix {
    int a = std::abs(t);
    if (a > L) return Matrix::Zero(d, d);
    return t >= 0 ? rbz_pos[static_cast<size_t>(a)] : Matrix(rbz_pos[static_cast<size_t>(a)].transpose());
  };
  for (int t = -(L + 1); t <= L + 1; ++t) {
    Matrix val = rbz(t);
    if (t == 0) val += SD;
    if (t - 1 >= 0 && t - 1 <= L) val += rbzd[static_cast<size_t>(t - 1)];
    if (-t - 1 >= 0 && -t - 1 <= L) val += rbzd[static_cast<size_t>(-t - 1)].transpose();
    if (has_w) {
      if (t - 1 >= 0 && t - 1 <= L) val += rv[static_cast<size_t>(t - 1)];
      if (-t - 1 >= 0 && -t - 1 <= L) val += rv[static_cast<size_t>(-t - 1)].transpose();
    }
    rd.at(t) = val;
  }
  return make_sigma_series(std::move(rd));
}

SpectralGrid psd_D_approx(const SecondOrderContext& ctx, int grid_size) {
  return psd_of_series(r_d_window(ctx), grid_size);
}

namespace {

Matrix deviation_transpose(const SecondOrderContext& ctx) {
  return (ctx.P0() - Vector::Ones(ctx.dim()) * ctx.pi0.transpose()).transpose();
}

template <bool Parallel>
SpectralGrid gamma_sandwich(const SecondOrderContext& ctx, const SpectralGrid& S_D) {
  const int d = ctx.dim();
  const int M = S_D.size();
  if (!S_D.values.empty() &&
      (S_D.values.front().rows() != d || S_D.values.front().cols() != d))
    throw Error(Errc::DimensionMismatch, "S_D block does not match the chain dimension");
  SpectralGrid g = SpectralGrid::zeros(M, d, d);
  g.thetas = S_D.thetas;
  g.tail_budget = S_D.tail_budget;
  const Matrix At = deviation_transpose(ctx);
  auto point = [&](int m) {
    Complex psi = std::exp(Complex(0.0, -S_D.thetas(m)));
    CMatrix F1 = CMatrix::Identity(d, d) - psi * At.cast<Complex>();
    CMatrix F2 = CMatrix::Identity(d, d) - std::conj(psi) * At.transpose().cast<Complex>();
    Eigen::PartialPivLU<CMatrix> lu1(F1);
    CMatrix X = lu1.solve(S_D.values[static_cast<size_t>(m)]);
    // X [I - conj(psi) At^T]^{-1} = (F2^T \ X^T)^T
    Eigen::PartialPivLU<CMatrix> lu2(F2.transpose());
    return CMatrix(lu2.solve(X.transpose()).transpose());
  };
  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (int m = 0; m < M; ++m) g.values[static_cast<size_t>(m)] = point(m);
  } else {
    for (int m = 0; m < M; ++m) g.values[static_cast<size_t>(m)] = point(m);
  }
  for (int m = 0; m < M; ++m)
    if (!g.values[static_cast<size_t>(m)].allFinite())
      throw Error(Errc::SingularResolvent, "resolvent singular at theta index " + std::to_string(m));
  return g;
}

}  // namespace

SpectralGrid psd_gamma(const SecondOrderContext& ctx, const SpectralGrid& S_D) {
  return gamma_sandwich<true>(ctx, S_D);
}

SpectralGrid psd_gamma_serial(const SecondOrderContext& ctx, const SpectralGrid& S_D) {
  return gamma_sandwich<false>(ctx, S_D);
}

CrossPsd cross_psd_gamma(const SecondOrderContext& ctx, const SpectralGrid& S_D) {
  const int d = ctx.dim();
  const int M = S_D.size();
  CrossPsd out;
  out.S_gamma_d = SpectralGrid::zeros(M, d, d);
  out.S_gamma_d.thetas = S_D.thetas;
  out.S_gamma_d.tail_budget = S_D.tail_budget;
  out.S_gamma_zeta = SpectralGrid::zeros(M, d, 1);
  out.S_gamma_zeta.thetas = S_D.thetas;
  const Matrix At = deviation_transpose(ctx);
  const double eps2 = ctx.epsilon() * ctx.epsilon();
  const bool geometric = ctx.input.geom.has_value();
  SpectralGrid lag_route;
  if (!geometric && eps2 != 0.0) lag_route = cross_psd_gamma_zeta_lag(ctx, M);

#pragma omp parallel for schedule(static)
  for (int m = 0; m < M; ++m) {
    Complex psi = std::exp(Complex(0.0, -S_D.thetas(m)));
    CMatrix F1 = CMatrix::Identity(d, d) - psi * At.cast<Complex>();
    Eigen::PartialPivLU<CMatrix> lu(F1);
    out.S_gamma_d.values[static_cast<size_t>(m)] = lu.solve(S_D.values[static_cast<size_t>(m)]);
    if (eps2 == 0.0) continue;
    if (geometric) {
      Eigen::VectorXcd rhs = ctx.B.cast<Complex>();
      Eigen::VectorXcd x = lu.solve(rhs);
      out.S_gamma_zeta.values[static_cast<size_t>(m)] =
          eps2 * psi * input_psd(ctx.input, S_D.thetas(m)) * x;
    } else {
      out.S_gamma_zeta.values[static_cast<size_t>(m)] = lag_route.values[static_cast<size_t>(m)];
    }
  }
  return out;
}

SpectralGrid cross_psd_gamma_zeta_lag(const SecondOrderContext& ctx, int grid_size) {
  const int d = ctx.dim();
  SpectralGrid g = SpectralGrid::zeros(grid_size, d, 1);
  if (ctx.epsilon() == 0.0) return g;
  const Matrix At = deviation_transpose(ctx);
  const double eps2 = ctx.epsilon() * ctx.epsilon();
  // columns At^{i-1} B
  std::vector<Vector> cols;
  cols.push_back(ctx.B);
  double scale = ctx.B.cwiseAbs().maxCoeff();
  while (cols.back().cwiseAbs().maxCoeff() > 1e-14 * std::max(scale, 1e-300)) {
    if (cols.size() > 100000)
      throw Error(Errc::TruncationNotConverged, "deviation powers do not decay");
    cols.push_back(At * cols.back());
  }
#pragma omp parallel for schedule(static)
  for (int m = 0; m < grid_size; ++m) {
    double theta = g.thetas(m);
    Complex psi = std::exp(Complex(0.0, -theta));
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(d);
    Complex phase = psi;  // psi^i starting at i = 1
    for (size_t i = 0; i < cols.size(); ++i) {
      acc += phase * cols[i].cast<Complex>();
      phase *= psi;
    }
    g.values[static_cast<size_t>(m)] = eps2 * input_psd(ctx.input, theta) * acc;
  }
  return g;
}

SpectralGrid observable_psd(const SecondOrderContext& ctx, const SpectralGrid& S_gamma,
                            const SpectralGrid& S_gamma_zeta, const Vector& f, double c) {
  const int d = ctx.dim();
  if (f.size() != d) throw Error(Errc::DimensionMismatch, "observable dimension");
  if (S_gamma.size() != S_gamma_zeta.size())
    throw Error(Errc::DimensionMismatch, "grid sizes differ");
  const int M = S_gamma.size();
  SpectralGrid g = SpectralGrid::zeros(M, 1, 1);
  g.thetas = S_gamma.thetas;
  g.tail_budget = S_gamma.tail_budget;
  Eigen::VectorXcd fc = f.cast<Complex>();
  for (int m = 0; m < M; ++m) {
    Complex v = (fc.transpose() * S_gamma.values[static_cast<size_t>(m)] * fc).value();
    if (c != 0.0) {
      Complex cross = (fc.transpose() * S_gamma_zeta.values[static_cast<size_t>(m)]).value();
      double s_zeta = ctx.epsilon() * ctx.epsilon() * input_psd(ctx.input, g.thetas(m));
      v += c * (cross + std::conj(cross)) + c * c * s_zeta;
    }
    g.values[static_cast<size_t>(m)](0, 0) = v;
  }
  return g;
}

LagSeries sigma_gamma_series(const SecondOrderContext& ctx, int lag_max) {
  const int d = ctx.dim();
  SigmaSeries rd = r_d_window(ctx);
  const Matrix At = deviation_transpose(ctx);

  // tail length from the deviation decay
  int tail = 1;
  {
    Matrix p = At;
    double n0 = std::max(inf_norm(p), 1e-300);
    while (inf_norm(p) > 1e-13 * n0 && tail < (1 << 16)) {
      p = p * p;
      tail *= 2;
    }
  }
  const int L_rd = rd.sigma.lag_max;
  const int lo = -(L_rd + tail + lag_max);
  const Matrix zero = Matrix::Zero(d, d);
  auto rd_at = [&](int t) -> const Matrix& {
    return rd.sigma.contains(t) ? rd.sigma.at(t) : zero;
  };

  // C(s) = R_D(s) + C(s+1) At^T, backward; Sigma(t) = C(t) + At Sigma(t-1), forward
  std::vector<Matrix> C(static_cast<size_t>(L_rd - lo + 1));
  Matrix next = Matrix::Zero(d, d);
  for (int s = L_rd; s >= lo; --s) {
    next = rd_at(s) + next * At.transpose();
    C[static_cast<size_t>(s - lo)] = next;
  }
  LagSeries out = LagSeries::zeros(-lag_max, lag_max, d, d, "Sigma_Gamma");
  Matrix prev = Matrix::Zero(d, d);
  for (int t = lo; t <= lag_max; ++t) {
    const Matrix& Ct = (t <= L_rd) ? C[static_cast<size_t>(t - lo)] : zero;
    prev = Ct + At * prev;
    if (t >= -lag_max) out.at(t) = prev;
  }
  return out;
}

double parseval_trace(const SpectralGrid& S) {
  // (1/2pi) * trapezoid of trace S over [-pi, pi]
  const int M = S.size();
  double acc = 0.0;
  for (int m = 0; m < M; ++m) {
    double w = (m == 0 || m == M - 1) ? 0.5 : 1.0;
    acc += w * S.values[static_cast<size_t>(m)].real().trace();
  }
  return acc / (M - 1);
}

void export_spectral_csv(const SpectralGrid& S,
                         const std::vector<std::pair<int, int>>& index_pairs,
                         const std::string& path, const std::string& header_comment) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoFailure, "cannot open " + path);
  if (!header_comment.empty()) os << "# " << header_comment << "\n";
  os << "theta";
  for (auto& [i, j] : index_pairs) os << ",re_S_" << i << "_" << j << ",im_S_" << i << "_" << j;
  os << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (int m = 0; m < S.size(); ++m) {
    put(S.thetas(m));
    for (auto& [i, j] : index_pairs) {
      Complex v = S.values[static_cast<size_t>(m)](i, j);
      os << ",";
      put(v.real());
      os << ",";
      put(v.imag());
    }
    os << "\n";
  }
}

}  // namespace perturbmc
