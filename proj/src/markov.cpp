#include "perturbmc/markov.hpp"

#include <numeric>
#include <vector>

namespace perturbmc {

namespace {

double row_sum(const Matrix& M, int i) {
  double s = 0.0;
  for (int j = 0; j < M.cols(); ++j) s += M(i, j);
  return s;
}

}  // namespace

void close_rows(Matrix& M) {
  for (int i = 0; i < M.rows(); ++i) {
    for (int pass = 0; pass < 4; ++pass) {
      double s = row_sum(M, i);
      if (s == 1.0) break;
      int jmax = 0;
      M.row(i).cwiseAbs().maxCoeff(&jmax);
      M(i, jmax) += 1.0 - s;
    }
  }
}

void require_unit_row_sums(const Matrix& M, double tol) {
  for (int i = 0; i < M.rows(); ++i) {
    double s = row_sum(M, i);
    if (std::abs(s - 1.0) > tol)
      throw Error(Errc::RowSumViolation,
                  "row " + std::to_string(i) + " sums to " + std::to_string(s));
  }
}

StochasticMatrix validate_stochastic(const Matrix& M) {
  if (M.rows() != M.cols())
    throw Error(Errc::NonSquare, std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
  const int d = static_cast<int>(M.rows());
  if (d < 2) throw Error(Errc::NonSquare, "dimension must be at least 2");
  Matrix P = M;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j)
      if (P(i, j) < 0.0)
        throw Error(Errc::NegativeEntry, "entry (" + std::to_string(i) + "," +
                                             std::to_string(j) + ") = " + std::to_string(P(i, j)));
    double s = row_sum(P, i);
    if (std::abs(s - 1.0) >= 1e-12)
      throw Error(Errc::RowSumViolation,
                  "row " + std::to_string(i) + " sums to " + std::to_string(s));
    if (s != 1.0) P.row(i) /= s;
  }
  close_rows(P);
  return StochasticMatrix{std::move(P), d};
}

namespace {

// Tarjan SCC on the positive-entry digraph.
struct Scc {
  std::vector<int> comp;  // node -> component id
  int count = 0;
};

Scc strongly_connected_components(const Matrix& P) {
  const int n = static_cast<int>(P.rows());
  Scc out;
  out.comp.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0), stk;
  std::vector<bool> on_stack(n, false);
  int next_index = 0;

  // iterative Tarjan
  struct Frame {
    int v;
    int j;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call;
    call.push_back({root, 0});
    index[root] = low[root] = next_index++;
    stk.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      int v = f.v;
      bool descended = false;
      for (; f.j < n; ++f.j) {
        if (P(v, f.j) <= 0.0) continue;
        int w = f.j;
        if (index[w] == -1) {
          index[w] = low[w] = next_index++;
          stk.push_back(w);
          on_stack[w] = true;
          ++f.j;
          call.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        while (true) {
          int w = stk.back();
          stk.pop_back();
          on_stack[w] = false;
          out.comp[w] = out.count;
          if (w == v) break;
        }
        ++out.count;
      }
      call.pop_back();
      if (!call.empty()) {
        int parent = call.back().v;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  return out;
}

// Period of the (strongly connected) node set: gcd of level differences over
// edges from a BFS spanning structure.
int class_period(const Matrix& P, const std::vector<int>& nodes) {
  const int n = static_cast<int>(P.rows());
  std::vector<int> level(n, -1);
  std::vector<int> queue;
  std::vector<bool> member(n, false);
  for (int v : nodes) member[v] = true;
  level[nodes[0]] = 0;
  queue.push_back(nodes[0]);
  int g = 0;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    int v = queue[qi];
    for (int w = 0; w < n; ++w) {
      if (P(v, w) <= 0.0 || !member[w]) continue;
      if (level[w] == -1) {
        level[w] = level[v] + 1;
        queue.push_back(w);
      } else {
        g = std::gcd(g, std::abs(level[v] + 1 - level[w]));
      }
    }
  }
  return g == 0 ? 1 : g;
}

}  // namespace

ErgodicFlags check_ergodic(const StochasticMatrix& P) {
  const int n = P.dim;
  Scc scc = strongly_connected_components(P.P);
  // terminal components: no edge leaving the component
  std::vector<bool> terminal(scc.count, true);
  for (int v = 0; v < n; ++v)
    for (int w = 0; w < n; ++w)
      if (P.P(v, w) > 0.0 && scc.comp[v] != scc.comp[w]) terminal[scc.comp[v]] = false;
  int n_terminal = 0, term_id = -1;
  for (int c = 0; c < scc.count; ++c)
    if (terminal[c]) {
      ++n_terminal;
      term_id = c;
    }
  ErgodicFlags flags;
  flags.irreducible = (n_terminal == 1);
  if (flags.irreducible) {
    std::vector<int> nodes;
    for (int v = 0; v < n; ++v)
      if (scc.comp[v] == term_id) nodes.push_back(v);
    flags.aperiodic = (class_period(P.P, nodes) == 1);
  }
  return flags;
}

Vector stationary_of_matrix(const Matrix& P) {
  const int d = static_cast<int>(P.rows());
  Matrix A = P.transpose() - Matrix::Identity(d, d);
  A.row(d - 1).setOnes();
  Vector b = Vector::Zero(d);
  b(d - 1) = 1.0;
  Eigen::PartialPivLU<Matrix> lu(A);
  Vector pi = lu.solve(b);
  double resid = ((P.transpose() * pi - pi).cwiseAbs()).maxCoeff();
  if (!pi.allFinite() || resid > 1e-10)
    throw Error(Errc::SingularSystem, "stationary solve residual " + std::to_string(resid));
  return pi;
}

ProbabilityVector stationary_distribution(const StochasticMatrix& P) {
  ErgodicFlags flags = check_ergodic(P);
  if (!flags.irreducible)
    throw Error(Errc::NotIrreducible, "chain has more than one closed class");
  Vector pi = stationary_of_matrix(P.P);
  // clip solver dust on transient states
  for (int i = 0; i < pi.size(); ++i)
    if (pi(i) < 0.0 && pi(i) > -1e-12) pi(i) = 0.0;
  pi /= pi.sum();
  return ProbabilityVector{std::move(pi)};
}

FundamentalMatrix fundamental_matrix(const StochasticMatrix& P, const ProbabilityVector& pi) {
  const int d = P.dim;
  Matrix M = Matrix::Identity(d, d) - P.P + Vector::Ones(d) * pi.p.transpose();
  Eigen::PartialPivLU<Matrix> lu(M);
  Matrix U = lu.solve(Matrix::Identity(d, d));
  double resid = (U * M - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  if (!U.allFinite() || resid > 1e-9)
    throw Error(Errc::SingularSystem, "fundamental matrix residual " + std::to_string(resid));
  return FundamentalMatrix{std::move(U)};
}

Matrix ergodic_deviation(const StochasticMatrix& P, const ProbabilityVector& pi, int n) {
  const int d = P.dim;
  Matrix Pn = Matrix::Identity(d, d);
  for (int k = 0; k < n; ++k) Pn = Pn * P.P;
  return Pn - Vector::Ones(d) * pi.p.transpose();
}

double inf_norm(const Matrix& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace perturbmc
