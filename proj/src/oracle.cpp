#include "perturbmc/oracle.hpp"

#include <cstdio>
#include <fstream>

namespace perturbmc {

using Complex = std::complex<double>;

const Matrix& JointChain::power(int n) const {
  if (n < 0) throw Error(Errc::LagTooLarge, "negative power");
  std::lock_guard<std::mutex> lock(cache_->m);
  auto& powers = cache_->powers;
  if (powers.empty()) powers.push_back(Matrix::Identity(n_states(), n_states()));
  while (static_cast<int>(powers.size()) <= n) powers.push_back(powers.back() * P);
  return powers[static_cast<size_t>(n)];
}

JointChain build_joint(const ControlledFamily& family, const InputSpec& input) {
  const int d = family.dim();
  const int nz = input.n_states();
  JointChain jc;
  jc.d = d;
  jc.nz = nz;
  jc.simulable = input.simulable;
  jc.input_values = input.epsilon * input.states;
  jc.P = Matrix::Zero(d * nz, d * nz);
  for (int zi = 0; zi < nz; ++zi) {
    double zeta = jc.input_values(zi);
    if (zeta < family.zeta_min || zeta > family.zeta_max)
      throw Error(Errc::InvalidZetaDomain, "eps * z = " + std::to_string(zeta) + " outside the family domain");
    Matrix Pz = family.evaluate(zeta);
    validate_stochastic(Pz);  // each conditional factor must be a real transition matrix
    for (int x = 0; x < d; ++x)
      for (int xp = 0; xp < d; ++xp) {
        if (Pz(x, xp) == 0.0) continue;
        for (int zj = 0; zj < nz; ++zj)
          jc.P(jc.flat(x, zi), jc.flat(xp, zj)) = Pz(x, xp) * input.K(zi, zj);
      }
  }
  require_unit_row_sums(jc.P, 1e-9);
  jc.pi = stationary_of_matrix(jc.P);
  if (jc.simulable) {
    for (int i = 0; i < jc.pi.size(); ++i)
      if (jc.pi(i) < 0.0 && jc.pi(i) > -1e-12) jc.pi(i) = 0.0;
    jc.pi /= jc.pi.sum();
  }
  return jc;
}

Vector exact_marginal(const JointChain& jc) {
  Vector out = Vector::Zero(jc.d);
  for (int x = 0; x < jc.d; ++x)
    for (int z = 0; z < jc.nz; ++z) out(x) += jc.pi(jc.flat(x, z));
  return out;
}

double exact_cross_corr(const JointChain& jc, const Vector& f, const Vector& g, long t) {
  if (f.size() != jc.n_states() || g.size() != jc.n_states())
    throw Error(Errc::DimensionMismatch, "observables must live on the joint states");
  const Vector* a = &f;
  const Vector* b = &g;
  if (t < 0) {
    std::swap(a, b);
    t = -t;
  }
  Vector Ptf = jc.power(static_cast<int>(t)) * (*a);
  return jc.pi.cwiseProduct(*b).dot(Ptf);
}

Matrix exact_gamma_corr(const JointChain& jc, long t) {
  if (t < 0) return exact_gamma_corr(jc, -t).transpose();
  const int d = jc.d, nz = jc.nz;
  Matrix F = Matrix::Zero(jc.n_states(), d);
  for (int x = 0; x < d; ++x)
    for (int z = 0; z < nz; ++z) F(jc.flat(x, z), x) = 1.0;
  Matrix G = jc.power(static_cast<int>(t)) * F;
  Matrix R = Matrix::Zero(d, d);
  for (int j = 0; j < d; ++j)
    for (int z = 0; z < nz; ++z) R.col(j) += jc.pi(jc.flat(j, z)) * G.row(jc.flat(j, z)).transpose();
  return R;
}

Vector input_observable(const JointChain& jc) {
  Vector zeta(jc.n_states());
  for (int x = 0; x < jc.d; ++x)
    for (int z = 0; z < jc.nz; ++z) zeta(jc.flat(x, z)) = jc.input_values(z);
  return zeta;
}

Vector lift_observable(const JointChain& jc, const Vector& f_x) {
  if (f_x.size() != jc.d) throw Error(Errc::DimensionMismatch, "observable dimension");
  Vector f(jc.n_states());
  for (int x = 0; x < jc.d; ++x)
    for (int z = 0; z < jc.nz; ++z) f(jc.flat(x, z)) = f_x(x);
  return f;
}

Vector exact_gamma_zeta_corr(const JointChain& jc, long t) {
  const int d = jc.d, nz = jc.nz;
  Vector zeta = input_observable(jc);
  Vector out = Vector::Zero(d);
  if (t >= 0) {
    // out_i = sum_j pi(j) zeta(j) P^t(j, (i,.))
    Vector w = jc.pi.cwiseProduct(zeta);
    for (long k = 0; k < t; ++k) w = jc.P.transpose() * w;
    for (int i = 0; i < d; ++i)
      for (int z = 0; z < nz; ++z) out(i) += w(jc.flat(i, z));
  } else {
    Vector y = zeta;
    for (long k = 0; k < -t; ++k) y = jc.P * y;
    for (int i = 0; i < d; ++i)
      for (int z = 0; z < nz; ++z) out(i) += jc.pi(jc.flat(i, z)) * y(jc.flat(i, z));
  }
  return out;
}

LagSeries exact_sigma_series(const JointChain& jc, const Vector& f, const Vector& g, int lag_max) {
  const int N = jc.n_states();
  if (f.size() != N || g.size() != N)
    throw Error(Errc::DimensionMismatch, "observables must live on the joint states");
  Matrix Pdev = jc.P - Vector::Ones(N) * jc.pi.transpose();
  LagSeries out = LagSeries::zeros(-lag_max, lag_max, 1, 1, "Sigma_fg");
  double mf = jc.pi.dot(f), mg = jc.pi.dot(g);
  out.at(0)(0, 0) = jc.pi.dot(f.cwiseProduct(g)) - mf * mg;
  Vector gpi = jc.pi.cwiseProduct(g), fpi = jc.pi.cwiseProduct(f);
  Vector u = f, v = g;
  for (int t = 1; t <= lag_max; ++t) {
    u = Pdev * u;
    v = Pdev * v;
    out.at(t)(0, 0) = gpi.dot(u);
    out.at(-t)(0, 0) = fpi.dot(v);
  }
  return out;
}

namespace {

template <bool Parallel>
SpectralGrid exact_psd_impl(const JointChain& jc, const Vector& f, const Vector& g, int M) {
  const int N = jc.n_states();
  if (f.size() != N || g.size() != N)
    throw Error(Errc::DimensionMismatch, "observables must live on the joint states");
  SpectralGrid out = SpectralGrid::zeros(M, 1, 1);
  Matrix Pdev = jc.P - Vector::Ones(N) * jc.pi.transpose();
  double mf = jc.pi.dot(f), mg = jc.pi.dot(g);
  double s0 = jc.pi.dot(f.cwiseProduct(g)) - mf * mg;
  Vector gpi = jc.pi.cwiseProduct(g), fpi = jc.pi.cwiseProduct(f);
  CMatrix Pc = Pdev.cast<Complex>();
  // one factorization per point: the conjugate system solves by conjugation
  // (real data), and S(-theta) = conj S(theta) fills the mirrored half.
  auto point = [&](int m) {
    Complex psi = std::exp(Complex(0.0, -out.thetas(m)));
    Eigen::PartialPivLU<CMatrix> lu(CMatrix::Identity(N, N) - psi * Pc);
    Eigen::VectorXcd x = lu.solve(f.cast<Complex>());
    Eigen::VectorXcd y = lu.solve(g.cast<Complex>()).conjugate();
    return s0 + (gpi.cast<Complex>().transpose() * (psi * (Pc * x))).value() +
           (fpi.cast<Complex>().transpose() * (std::conj(psi) * (Pc * y))).value();
  };
  const int half = (M + 1) / 2;  // grid is symmetric under m <-> M-1-m
  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (int m = 0; m < half; ++m) out.values[static_cast<size_t>(m)](0, 0) = point(m);
  } else {
    for (int m = 0; m < half; ++m) out.values[static_cast<size_t>(m)](0, 0) = point(m);
  }
  for (int m = half; m < M; ++m)
    out.values[static_cast<size_t>(m)](0, 0) =
        std::conj(out.values[static_cast<size_t>(M - 1 - m)](0, 0));
  for (int m = 0; m < M; ++m)
    if (!out.values[static_cast<size_t>(m)].allFinite())
      throw Error(Errc::SingularResolvent, "resolvent singular at theta index " + std::to_string(m));
  return out;
}

}  // namespace

SpectralGrid exact_psd(const JointChain& jc, const Vector& f, const Vector& g, int grid_size) {
  return exact_psd_impl<true>(jc, f, g, grid_size);
}

SpectralGrid exact_psd_serial(const JointChain& jc, const Vector& f, const Vector& g,
                              int grid_size) {
  return exact_psd_impl<false>(jc, f, g, grid_size);
}

DeltaStats exact_delta_stats(const JointChain& jc, const ControlledFamily& family, int t_max) {
  const int d = jc.d, nz = jc.nz;
  // X_{x,z} = diag(p_{x,z}) - p_{x,z}^T p_{x,z}, p = row x of P_{eps z}
  std::vector<Matrix> Pz(static_cast<size_t>(nz));
  for (int z = 0; z < nz; ++z) Pz[static_cast<size_t>(z)] = family.evaluate(jc.input_values(z));
  Matrix sigma = Matrix::Zero(d, d);
  for (int x = 0; x < d; ++x)
    for (int z = 0; z < nz; ++z) {
      double w = jc.pi(jc.flat(x, z));
      if (w == 0.0) continue;
      Vector p = Pz[static_cast<size_t>(z)].row(x).transpose();
      sigma += w * (Matrix(p.asDiagonal()) - p * p.transpose());
    }
  DeltaStats out;
  out.sigma_delta = std::move(sigma);
  out.r_delta2_zeta = LagSeries::zeros(-t_max, 0, d, d, "R_Delta2_zeta");
  // E[zeta_t | z_{-1} = z] = (K^{t+1} zvec)(z), zvec = eps * states; the
  // conditional weight multiplying X_{x,z}
  Matrix Kt = Matrix::Identity(nz, nz);
  // zeta values per z-state come from the joint-chain layout
  Vector zvec = jc.input_values;
  // advance to K^{1} for t = 0
  // K is recoverable from the joint chain: K(z, z') = sum_{x'} P((x,z),(x',z')) / P_{eps z}(x, x')
  // simpler: K(z,z') = sum over any fixed x of joint transitions with Pz(x,x') summed out.
  Matrix K = Matrix::Zero(nz, nz);
  for (int z = 0; z < nz; ++z) {
    // use x = 0: sum over x' of P((0,z),(x',z')) = K(z,z') since sum_x' Pz(0,x') = 1
    for (int zp = 0; zp < nz; ++zp) {
      double s = 0.0;
      for (int xp = 0; xp < d; ++xp) s += jc.P(jc.flat(0, z), jc.flat(xp, zp));
      K(z, zp) = s;
    }
  }
  for (int t = 0; t <= t_max; ++t) {
    Kt = Kt * K;  // K^{t+1}
    Vector cond = Kt * zvec;
    Matrix acc = Matrix::Zero(d, d);
    for (int x = 0; x < d; ++x)
      for (int z = 0; z < nz; ++z) {
        double w = jc.pi(jc.flat(x, z)) * cond(z);
        if (w == 0.0) continue;
        Vector p = Pz[static_cast<size_t>(z)].row(x).transpose();
        acc += w * (Matrix(p.asDiagonal()) - p * p.transpose());
      }
    out.r_delta2_zeta.at(-t) = acc;
  }
  return out;
}

Matrix exact_r_d(const JointChain& jc, const Matrix& P0, long t) {
  Matrix Rt = exact_gamma_corr(jc, t);
  return Rt - exact_gamma_corr(jc, t + 1) * P0 - P0.transpose() * exact_gamma_corr(jc, t - 1) +
         P0.transpose() * Rt * P0;
}

Vector exact_r_d_zeta(const JointChain& jc, const Matrix& P0, long t) {
  return exact_gamma_zeta_corr(jc, t) - P0.transpose() * exact_gamma_zeta_corr(jc, t - 1);
}

void export_joint_csv(const JointChain& jc, const std::string& p_path,
                      const std::string& pi_path) {
  char buf[32];
  auto put = [&](std::ofstream& os, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  {
    std::ofstream os(p_path, std::ios::binary);
    if (!os) throw Error(Errc::IoFailure, "cannot open " + p_path);
    os << "# joint transition matrix, flat index = x * n_z + z, d=" << jc.d << " n_z=" << jc.nz
       << "\n";
    for (int i = 0; i < jc.n_states(); ++i) {
      for (int j = 0; j < jc.n_states(); ++j) {
        if (j) os << ",";
        put(os, jc.P(i, j));
      }
      os << "\n";
    }
  }
  {
    std::ofstream os(pi_path, std::ios::binary);
    if (!os) throw Error(Errc::IoFailure, "cannot open " + pi_path);
    os << "# stationary pmf of the joint chain, flat index = x * n_z + z\n";
    for (int i = 0; i < jc.n_states(); ++i) {
      put(os, jc.pi(i));
      os << "\n";
    }
  }
}

}  // namespace perturbmc
