#include "perturbmc/simulate.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace perturbmc {

namespace {

uint64_t splitmix64(uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t derive_seed(uint64_t seed, uint64_t salt) {
  uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (salt + 1));
  return splitmix64(s);
}

}  // namespace

UniformStream::UniformStream(uint64_t seed, uint64_t stream) {
  uint64_t s = seed ^ (0xA02BDBF7BB3C0A7ULL * (stream + 1));
  for (auto& v : s_) v = splitmix64(s);
}

double UniformStream::next() {
  // xoshiro256++
  uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return static_cast<double>(result >> 11) * 0x1.0p-53;
}

int sample_row(std::span<const double> row, double u) {
  double cum = 0.0;
  for (size_t j = 0; j < row.size(); ++j) {
    cum += row[j];
    if (u < cum) return static_cast<int>(j);
  }
  for (int j = static_cast<int>(row.size()) - 1; j >= 0; --j)
    if (row[j] > 0.0) return j;
  return static_cast<int>(row.size()) - 1;
}

namespace {

std::vector<Matrix> conditional_matrices(const ControlledFamily& family, const InputSpec& input) {
  std::vector<Matrix> Pz;
  Pz.reserve(static_cast<size_t>(input.n_states()));
  for (int z = 0; z < input.n_states(); ++z) {
    double zeta = input.epsilon * input.states(z);
    if (zeta < family.zeta_min || zeta > family.zeta_max)
      throw Error(Errc::InvalidZetaDomain, "eps * z outside the family domain");
    Pz.push_back(family.evaluate(zeta));
  }
  return Pz;
}

}  // namespace

CoupledPath simulate_coupled(const ControlledFamily& family, const InputSpec& input, long T,
                             uint64_t seed, int burn_in) {
  if (T < 1) throw Error(Errc::InvalidInput, "T >= 1 required");
  if (!input.simulable)
    throw Error(Errc::NotSimulable, "input chain has negative transition probabilities");
  const int d = family.dim();
  const int nz = input.n_states();

  // row-major copies for cache-friendly inverse-CDF scans
  std::vector<Matrix> Pz = conditional_matrices(family, input);
  std::vector<std::vector<double>> rows0(static_cast<size_t>(d), std::vector<double>(d));
  std::vector<std::vector<std::vector<double>>> rowsz(
      static_cast<size_t>(nz),
      std::vector<std::vector<double>>(static_cast<size_t>(d), std::vector<double>(d)));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) rows0[static_cast<size_t>(i)][static_cast<size_t>(j)] = family.P0.P(i, j);
  for (int z = 0; z < nz; ++z)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        rowsz[static_cast<size_t>(z)][static_cast<size_t>(i)][static_cast<size_t>(j)] =
            Pz[static_cast<size_t>(z)](i, j);
  std::vector<std::vector<double>> rows_k(static_cast<size_t>(nz), std::vector<double>(nz));
  for (int z = 0; z < nz; ++z)
    for (int zp = 0; zp < nz; ++zp) rows_k[static_cast<size_t>(z)][static_cast<size_t>(zp)] = input.K(z, zp);

  UniformStream zeta_stream(seed, 0), bullet_stream(seed, 1), circ_stream(seed, 2),
      init_stream(seed, 3);

  Vector pi0 = stationary_distribution(family.P0).p;
  std::vector<double> pi0v(pi0.data(), pi0.data() + d);
  std::vector<double> muv(input.mu.data(), input.mu.data() + nz);

  int x = sample_row(pi0v, init_stream.next());
  int xb = x;
  int z = sample_row(muv, init_stream.next());

  CoupledPath path;
  path.seed = seed;
  path.burn_in = burn_in;
  path.x.reserve(static_cast<size_t>(T));
  path.x_bullet.reserve(static_cast<size_t>(T));
  path.zeta_state.reserve(static_cast<size_t>(T));

  const long total = burn_in + T;
  for (long t = 0; t < total; ++t) {
    if (t >= burn_in) {
      path.x.push_back(x);
      path.x_bullet.push_back(xb);
      path.zeta_state.push_back(z);
    }
    double ub = bullet_stream.next();
    double uo = circ_stream.next();
    double uz = zeta_stream.next();
    double n = (x == xb) ? ub : uo;
    int xb_next = sample_row(rows0[static_cast<size_t>(xb)], ub);
    int x_next = sample_row(rowsz[static_cast<size_t>(z)][static_cast<size_t>(x)], n);
    z = sample_row(rows_k[static_cast<size_t>(z)], uz);
    x = x_next;
    xb = xb_next;
  }
  return path;
}

std::vector<Vector> extract_delta(const CoupledPath& path, const ControlledFamily& family,
                                  const InputSpec& input) {
  const long T = path.length();
  std::vector<Matrix> Pz = conditional_matrices(family, input);
  std::vector<Vector> deltas;
  deltas.reserve(static_cast<size_t>(T - 1));
  for (long t = 0; t + 1 < T; ++t) {
    Vector delta = -Pz[static_cast<size_t>(path.zeta_state[static_cast<size_t>(t)])]
                        .row(path.x[static_cast<size_t>(t)])
                        .transpose();
    delta(path.x[static_cast<size_t>(t + 1)]) += 1.0;
    deltas.push_back(std::move(delta));
  }
  return deltas;
}

namespace {

EmpiricalSeries batched_series(int lag_min, int lag_max, int rows, int cols) {
  EmpiricalSeries s;
  s.mean = LagSeries::zeros(lag_min, lag_max, rows, cols);
  s.se = LagSeries::zeros(lag_min, lag_max, rows, cols);
  return s;
}

void finalize_batches(EmpiricalSeries& out, std::vector<std::vector<Matrix>>& batch_sums,
                      std::vector<std::vector<long>>& batch_counts) {
  const int n_lags = out.mean.n_lags();
  const int nb = static_cast<int>(batch_sums.size());
  for (int li = 0; li < n_lags; ++li) {
    Matrix total = Matrix::Zero(out.mean.values[0].rows(), out.mean.values[0].cols());
    long count = 0;
    for (int b = 0; b < nb; ++b) {
      total += batch_sums[static_cast<size_t>(b)][static_cast<size_t>(li)];
      count += batch_counts[static_cast<size_t>(b)][static_cast<size_t>(li)];
    }
    if (count == 0) continue;
    Matrix mean = total / static_cast<double>(count);
    out.mean.values[static_cast<size_t>(li)] = mean;
    // batch means around the overall mean
    Matrix var = Matrix::Zero(mean.rows(), mean.cols());
    int used = 0;
    for (int b = 0; b < nb; ++b) {
      long cb = batch_counts[static_cast<size_t>(b)][static_cast<size_t>(li)];
      if (cb == 0) continue;
      Matrix mb = batch_sums[static_cast<size_t>(b)][static_cast<size_t>(li)] / static_cast<double>(cb);
      var += (mb - mean).cwiseProduct(mb - mean);
      ++used;
    }
    if (used > 1)
      out.se.values[static_cast<size_t>(li)] =
          (var / static_cast<double>(used) / static_cast<double>(used - 1)).cwiseSqrt();
    out.samples = count;
    out.batches = used;
  }
}

}  // namespace

EmpiricalSeries empirical_corr(const std::vector<Vector>& a, const std::vector<Vector>& b,
                               int lag_min, int lag_max, int n_batches) {
  const long T = static_cast<long>(a.size());
  if (b.size() != a.size()) throw Error(Errc::DimensionMismatch, "sequence lengths differ");
  if (T < 2) throw Error(Errc::InvalidInput, "need at least two samples");
  if (std::max(std::abs(lag_min), std::abs(lag_max)) > T / 10)
    throw Error(Errc::LagTooLarge, "|lag| must be at most T/10");
  const int p = static_cast<int>(a.front().size());
  const int q = static_cast<int>(b.front().size());
  EmpiricalSeries out = batched_series(lag_min, lag_max, p, q);
  const int nb = std::max(2, n_batches);
  std::vector<std::vector<Matrix>> sums(
      static_cast<size_t>(nb),
      std::vector<Matrix>(static_cast<size_t>(out.mean.n_lags()), Matrix::Zero(p, q)));
  std::vector<std::vector<long>> counts(static_cast<size_t>(nb),
                                        std::vector<long>(static_cast<size_t>(out.mean.n_lags()), 0));
  for (int t = lag_min; t <= lag_max; ++t) {
    const int li = t - lag_min;
    const long s_lo = std::max<long>(0, -t);
    const long s_hi = T - 1 - std::max<long>(0, t);
    for (long s = s_lo; s <= s_hi; ++s) {
      int bidx = static_cast<int>((s - s_lo) * nb / (s_hi - s_lo + 1));
      sums[static_cast<size_t>(bidx)][static_cast<size_t>(li)] +=
          a[static_cast<size_t>(s + t)] * b[static_cast<size_t>(s)].transpose();
      ++counts[static_cast<size_t>(bidx)][static_cast<size_t>(li)];
    }
  }
  finalize_batches(out, sums, counts);
  return out;
}

MartingaleStats martingale_stats(const CoupledPath& path, const ControlledFamily& family,
                                 const InputSpec& input, int k_max, int t_max, int n_batches) {
  const long T = path.length();
  if (T < 10 * (k_max + t_max + 2)) throw Error(Errc::InvalidInput, "path too short");
  const int d = family.dim();
  std::vector<Matrix> Pz = conditional_matrices(family, input);

  // sparse deltas: support of the source row plus the landed state
  struct Sparse {
    std::vector<std::pair<int, double>> nz;
  };
  const long n_delta = T - 1;  // Delta_tau for tau = 1..T-1, index tau-1
  std::vector<Sparse> deltas(static_cast<size_t>(n_delta));
  for (long t = 0; t + 1 < T; ++t) {
    const Matrix& P = Pz[static_cast<size_t>(path.zeta_state[static_cast<size_t>(t)])];
    int xs = path.x[static_cast<size_t>(t)];
    int xn = path.x[static_cast<size_t>(t + 1)];
    Sparse sp;
    for (int j = 0; j < d; ++j) {
      double pj = P(xs, j);
      if (pj == 0.0 && j != xn) continue;
      double v = (j == xn) ? 1.0 - pj : -pj;
      if (v != 0.0) sp.nz.emplace_back(j, v);
    }
    deltas[static_cast<size_t>(t)] = std::move(sp);
  }
  auto zeta_at = [&](long s) {
    return input.epsilon * input.states(path.zeta_state[static_cast<size_t>(s)]);
  };

  const int nb = std::max(2, n_batches);
  MartingaleStats ms;
  ms.delta_mean = batched_series(0, 0, d, 1);
  ms.r_delta_zeta = batched_series(-k_max, k_max, d, 1);
  ms.r_delta = batched_series(0, t_max, d, d);

  std::vector<std::vector<Matrix>> mean_sums(static_cast<size_t>(nb),
                                             std::vector<Matrix>(1, Matrix::Zero(d, 1)));
  std::vector<std::vector<long>> mean_counts(static_cast<size_t>(nb), std::vector<long>(1, 0));
  std::vector<std::vector<Matrix>> dz_sums(
      static_cast<size_t>(nb),
      std::vector<Matrix>(static_cast<size_t>(2 * k_max + 1), Matrix::Zero(d, 1)));
  std::vector<std::vector<long>> dz_counts(static_cast<size_t>(nb),
                                           std::vector<long>(static_cast<size_t>(2 * k_max + 1), 0));
  std::vector<std::vector<Matrix>> dd_sums(
      static_cast<size_t>(nb),
      std::vector<Matrix>(static_cast<size_t>(t_max + 1), Matrix::Zero(d, d)));
  std::vector<std::vector<long>> dd_counts(static_cast<size_t>(nb),
                                           std::vector<long>(static_cast<size_t>(t_max + 1), 0));

  // Delta index tau runs over 0..n_delta-1 (Delta at time tau+1); zeta index
  // s aligns with path positions.
  for (long tau = 0; tau < n_delta; ++tau) {
    int b = static_cast<int>(tau * nb / n_delta);
    const Sparse& cur = deltas[static_cast<size_t>(tau)];
    for (auto& [i, v] : cur.nz) mean_sums[static_cast<size_t>(b)][0](i, 0) += v;
    ++mean_counts[static_cast<size_t>(b)][0];
    // R_{Delta,zeta}(k) = E[Delta_{s+k} zeta_s]: Delta time is tau+1, pair
    // with zeta at time tau+1-k
    for (int k = -k_max; k <= k_max; ++k) {
      long s = tau + 1 - k;
      if (s < 0 || s >= T) continue;
      double zv = zeta_at(s);
      auto& slot = dz_sums[static_cast<size_t>(b)][static_cast<size_t>(k + k_max)];
      for (auto& [i, v] : cur.nz) slot(i, 0) += v * zv;
      ++dz_counts[static_cast<size_t>(b)][static_cast<size_t>(k + k_max)];
    }
    // R_Delta(t) = E[Delta_{s+t} Delta_s^T]
    for (int t = 0; t <= t_max; ++t) {
      long prev = tau - t;
      if (prev < 0) continue;
      const Sparse& old = deltas[static_cast<size_t>(prev)];
      auto& slot = dd_sums[static_cast<size_t>(b)][static_cast<size_t>(t)];
      for (auto& [i, vi] : cur.nz)
        for (auto& [j, vj] : old.nz) slot(i, j) += vi * vj;
      ++dd_counts[static_cast<size_t>(b)][static_cast<size_t>(t)];
    }
  }
  finalize_batches(ms.delta_mean, mean_sums, mean_counts);
  finalize_batches(ms.r_delta_zeta, dz_sums, dz_counts);
  finalize_batches(ms.r_delta, dd_sums, dd_counts);
  return ms;
}

InputSpec with_epsilon(const InputSpec& input, double epsilon) {
  if (epsilon < 0.0 || epsilon > 1.0) throw Error(Errc::InvalidInput, "epsilon in [0, 1]");
  InputSpec out = input;
  out.epsilon = epsilon;
  return out;
}

namespace {

template <bool Parallel>
std::vector<CouplingRate> coupling_rate_impl(const ControlledFamily& family,
                                             const InputSpec& input,
                                             const std::vector<double>& eps_list, long T,
                                             uint64_t seed) {
  const int n = static_cast<int>(eps_list.size());
  std::vector<CouplingRate> out(static_cast<size_t>(n));
  auto run_one = [&](int i) {
    InputSpec in_eps = with_epsilon(input, eps_list[static_cast<size_t>(i)]);
    CoupledPath path =
        simulate_coupled(family, in_eps, T, derive_seed(seed, static_cast<uint64_t>(i)));
    long mism = 0;
    for (long t = 0; t < path.length(); ++t)
      if (path.x[static_cast<size_t>(t)] != path.x_bullet[static_cast<size_t>(t)]) ++mism;
    CouplingRate r;
    r.epsilon = eps_list[static_cast<size_t>(i)];
    r.rate = static_cast<double>(mism) / static_cast<double>(T);
    r.se = std::sqrt(std::max(r.rate * (1.0 - r.rate), 0.0) / static_cast<double>(T));
    return r;
  };
  if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = run_one(i);
  } else {
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = run_one(i);
  }
  return out;
}

}  // namespace

std::vector<CouplingRate> coupling_rate(const ControlledFamily& family, const InputSpec& input,
                                        const std::vector<double>& eps_list, long T,
                                        uint64_t seed) {
  return coupling_rate_impl<true>(family, input, eps_list, T, seed);
}

std::vector<CouplingRate> coupling_rate_serial(const ControlledFamily& family,
                                               const InputSpec& input,
                                               const std::vector<double>& eps_list, long T,
                                               uint64_t seed) {
  return coupling_rate_impl<false>(family, input, eps_list, T, seed);
}

void export_path_csv(const CoupledPath& path, const InputSpec& input, const std::string& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error(Errc::IoFailure, "cannot open " + file);
  char buf[64];
  std::snprintf(buf, sizeof buf, "# seed=%" PRIu64 " burn_in=%d\n", path.seed, path.burn_in);
  os << buf << "t,x,x_bullet,zeta1\n";
  for (long t = 0; t < path.length(); ++t) {
    double z1 = input.states(path.zeta_state[static_cast<size_t>(t)]);
    std::snprintf(buf, sizeof buf, "%ld,%d,%d,%.17g\n", t, path.x[static_cast<size_t>(t)],
                  path.x_bullet[static_cast<size_t>(t)], z1);
    os << buf;
  }
}

}  // namespace perturbmc
