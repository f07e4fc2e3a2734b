#include "cim/monarch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cim/errors.hpp"

namespace cim::monarch {

namespace {

thread_local OpCounts* active_counts = nullptr;

void require_length(std::span<const double> x, std::size_t n, const char* what) {
  if (x.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) +
                         ", got " + std::to_string(x.size()));
  }
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

std::size_t isqrt_exact(std::size_t n) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

}  // namespace

CountingScope::CountingScope() : previous_(active_counts) { active_counts = &counts_; }
CountingScope::~CountingScope() { active_counts = previous_; }

namespace detail {
void count_flops(std::uint64_t n) {
  if (active_counts) active_counts->flops += n;
}
void count_permutation() {
  if (active_counts) ++active_counts->permutations;
}
}  // namespace detail

PermutationSpec PermutationSpec::make(std::size_t n, std::size_t b) {
  if (n == 0 || b == 0 || n % b != 0) {
    throw DimensionError("permutation: block size " + std::to_string(b) + " does not divide n = " +
                         std::to_string(n));
  }
  return PermutationSpec{n, b, n / b};
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("dense matrix: " + std::to_string(data_.size()) + " entries for " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix I(n, n);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

DenseMatrix DenseMatrix::random(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  DenseMatrix A(rows, cols);
  for (double& e : A.data_) e = dist(rng);
  return A;
}

Vector DenseMatrix::matvec(std::span<const double> x) const {
  require_length(x, cols_, "matvec");
  Vector y(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* row = &data_[r * cols_];
    double acc = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  detail::count_flops(2 * rows_ * cols_);
  return y;
}

double DenseMatrix::frobenius() const { return norm2(data_); }

BlockDiagonalFactor BlockDiagonalFactor::identity(std::size_t b, std::size_t d) {
  return {b, d, std::vector<DenseMatrix>(d, DenseMatrix::identity(b))};
}

BlockDiagonalFactor BlockDiagonalFactor::zeros(std::size_t b, std::size_t d) {
  return {b, d, std::vector<DenseMatrix>(d, DenseMatrix(b, b))};
}

BlockDiagonalFactor BlockDiagonalFactor::random(std::size_t b, std::size_t d, std::mt19937_64& rng) {
  BlockDiagonalFactor f{b, d, {}};
  f.blocks.reserve(d);
  for (std::size_t j = 0; j < d; ++j) f.blocks.push_back(DenseMatrix::random(b, b, rng));
  return f;
}

Vector SparseFactor::apply(std::span<const double> x) const {
  require_length(x, n, "sparse factor");
  Vector y(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += val[k] * x[col[k]];
    y[r] = acc;
  }
  detail::count_flops(2 * nnz());
  return y;
}

MonarchMatrix MonarchMatrix::make(BlockDiagonalFactor L, BlockDiagonalFactor R) {
  if (L.b != R.b || L.d != R.d) throw DimensionError("monarch: L and R block shapes differ");
  for (const auto* f : {&L, &R}) {
    if (f->blocks.size() != f->d) throw DimensionError("monarch: factor block count mismatch");
    for (const auto& blk : f->blocks) {
      if (blk.rows() != f->b || blk.cols() != f->b) throw DimensionError("monarch: block is not b x b");
    }
  }
  MonarchMatrix M;
  M.perm = PermutationSpec::make(L.n(), L.b);
  M.L = std::move(L);
  M.R = std::move(R);
  return M;
}

MonarchMatrix MonarchMatrix::random(std::size_t n, std::size_t b, std::mt19937_64& rng) {
  const auto spec = PermutationSpec::make(n, b);
  auto L = BlockDiagonalFactor::random(b, spec.d, rng);
  auto R = BlockDiagonalFactor::random(b, spec.d, rng);
  return make(std::move(L), std::move(R));
}

Vector permute(std::span<const double> x, const PermutationSpec& spec) {
  require_length(x, spec.n, "permute");
  Vector out(spec.n);
  for (std::size_t k = 0; k < spec.n; ++k) out[spec.map(k)] = x[k];
  detail::count_permutation();
  return out;
}

Vector block_diag_mvm(const BlockDiagonalFactor& f, std::span<const double> x) {
  require_length(x, f.n(), "block_diag_mvm");
  Vector y(f.n(), 0.0);
  for (std::size_t j = 0; j < f.d; ++j) {
    const auto& B = f.blocks[j];
    const std::size_t base = j * f.b;
    for (std::size_t r = 0; r < f.b; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < f.b; ++c) acc += B(r, c) * x[base + c];
      y[base + r] = acc;
    }
  }
  detail::count_flops(2 * f.n() * f.b);
  return y;
}

Vector monarch_mvm(const MonarchMatrix& M, std::span<const double> x) {
  require_length(x, M.n(), "monarch_mvm");
  if (M.folded) {
    auto t = M.R_folded->apply(x);
    t = permute(t, M.perm);
    return M.L_folded->apply(t);
  }
  auto t = permute(x, M.perm);
  t = block_diag_mvm(M.R, t);
  t = permute(t, M.perm);
  t = block_diag_mvm(M.L, t);
  return permute(t, M.perm);
}

DenseMatrix expand_to_dense(const MonarchMatrix& M) {
  const std::size_t n = M.n();
  DenseMatrix D(n, n);
  Vector e(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    e[c] = 1.0;
    const auto col = monarch_mvm(M, e);
    for (std::size_t r = 0; r < n; ++r) D(r, c) = col[r];
    e[c] = 0.0;
  }
  return D;
}

namespace {

// One power-iteration run on G = A^T A from a unit start vector.  Returns the
// converged unit vector, or an empty vector if G annihilates the start.
struct PowerRun {
  Vector v;
  int iterations = 0;
  bool converged = false;
};

PowerRun power_iterate(const DenseMatrix& G, Vector v, const Vector* deflate = nullptr) {
  const std::size_t n = G.rows();
  PowerRun run;
  auto project_out = [&](Vector& w) {
    if (!deflate) return;
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += w[i] * (*deflate)[i];
    for (std::size_t i = 0; i < n; ++i) w[i] -= dot * (*deflate)[i];
  };
  project_out(v);
  double nv = norm2(v);
  if (nv == 0.0) return run;
  for (double& e : v) e /= nv;
  for (int it = 1; it <= kRank1MaxIterations; ++it) {
    Vector w = G.matvec(v);
    project_out(w);
    const double nw = norm2(w);
    run.iterations = it;
    if (nw == 0.0 || !std::isfinite(nw)) {
      run.v.clear();
      run.converged = true;
      return run;
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] /= nw;
      diff += (w[i] - v[i]) * (w[i] - v[i]);
    }
    v = std::move(w);
    if (std::sqrt(diff) < kRank1Tolerance) {
      run.converged = true;
      break;
    }
  }
  run.v = std::move(v);
  return run;
}

double rayleigh(const DenseMatrix& G, const Vector& v) {
  const auto Gv = G.matvec(v);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * Gv[i];
  return s;
}

double residual_of(const DenseMatrix& A, const Vector& u, const Vector& v) {
  double s = 0.0;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) {
      const double e = A(r, c) - u[r] * v[c];
      s += e * e;
    }
  }
  return std::sqrt(s);
}

}  // namespace

Rank1 rank1_approx(const DenseMatrix& A) {
  const std::size_t rows = A.rows();
  const std::size_t cols = A.cols();
  for (double e : A.data()) {
    if (!std::isfinite(e)) throw DimensionError("rank1_approx: non-finite entry");
  }
  Rank1 out;
  out.u.assign(rows, 0.0);
  out.v.assign(cols, 0.0);
  const double fro = A.frobenius();
  if (fro == 0.0) return out;

  // G = A^T A
  DenseMatrix G(cols, cols);
  for (std::size_t i = 0; i < cols; ++i) {
    for (std::size_t j = i; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += A(r, i) * A(r, j);
      G(i, j) = s;
      G(j, i) = s;
    }
  }

  PowerRun run = power_iterate(G, Vector(cols, 1.0));
  if (run.v.empty()) {
    // All-ones start lies in the null space of G: fixed-seed random restart.
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> dist;
    Vector start(cols);
    for (double& e : start) e = dist(rng);
    run = power_iterate(G, std::move(start));
  } else {
    // Guard against an all-ones start orthogonal to the dominant direction:
    // look for a larger eigenvalue in the complement of the converged vector.
    const double lambda = rayleigh(G, run.v);
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> dist;
    Vector probe(cols);
    for (double& e : probe) e = dist(rng);
    PowerRun other = power_iterate(G, probe, &run.v);
    if (!other.v.empty() && rayleigh(G, other.v) > lambda * (1.0 + 1e-9)) {
      run = power_iterate(G, other.v);
    }
  }
  out.iterations = run.iterations;
  if (run.v.empty()) {
    out.residual = fro;
    return out;
  }
  const Vector& v = run.v;
  Vector Av = A.matvec(v);
  const double sigma = norm2(Av);
  if (!run.converged) {
    Vector u_tmp = Av;
    const double res = residual_of(A, u_tmp, v);
    throw ConvergenceError("rank1_approx: power iteration did not converge", res, run.iterations);
  }
  if (sigma == 0.0) {
    out.residual = fro;
    return out;
  }
  const double root = std::sqrt(sigma);
  for (std::size_t r = 0; r < rows; ++r) out.u[r] = Av[r] / sigma * root;
  for (std::size_t c = 0; c < cols; ++c) out.v[c] = v[c] * root;
  out.sigma = sigma;
  out.residual = residual_of(A, out.u, out.v);
  return out;
}

Projection d2s_project(const DenseMatrix& W, std::size_t b) {
  const std::size_t n = W.rows();
  if (W.cols() != n) throw DimensionError("d2s_project: matrix is not square");
  if (b == 0 || n % b != 0) {
    throw DimensionError("d2s_project: n = " + std::to_string(n) + " is not a multiple of b = " +
                         std::to_string(b));
  }
  if (b * b != n) throw UnsupportedConfig("d2s_project: requires b = sqrt(n)");

  // With u = P x, w = R u, v = P w, z = L v, y = P z one gets
  //   M[e*b + k][c*b + a] = L_k[e][a] * R_a[k][c].
  // For fixed (k, a) the b x b slice S[e][c] = W[e*b + k][c*b + a] is therefore
  // the outer product of column a of L_k and row k of R_a, and distinct (k, a)
  // touch disjoint parameters, so per-slice rank-1 SVD is globally optimal.
  auto L = BlockDiagonalFactor::zeros(b, b);
  auto R = BlockDiagonalFactor::zeros(b, b);
  DenseMatrix slice(b, b);
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t a = 0; a < b; ++a) {
      for (std::size_t e = 0; e < b; ++e) {
        for (std::size_t c = 0; c < b; ++c) slice(e, c) = W(e * b + k, c * b + a);
      }
      const auto r1 = rank1_approx(slice);
      for (std::size_t e = 0; e < b; ++e) L.blocks[k](e, a) = r1.u[e];
      for (std::size_t c = 0; c < b; ++c) R.blocks[a](k, c) = r1.v[c];
    }
  }
  Projection p;
  p.M = MonarchMatrix::make(std::move(L), std::move(R));
  const auto D = expand_to_dense(p.M);
  double s = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) {
    const double e = W.data()[i] - D.data()[i];
    s += e * e;
  }
  p.error = std::sqrt(s);
  return p;
}

Projection d2s_project_rect(const DenseMatrix& W) {
  const std::size_t n = std::max(W.rows(), W.cols());
  const std::size_t b = isqrt_exact(n);
  if (b * b != n) throw UnsupportedConfig("d2s_project_rect: max(rows, cols) is not a perfect square");
  DenseMatrix padded(n, n);
  for (std::size_t r = 0; r < W.rows(); ++r) {
    for (std::size_t c = 0; c < W.cols(); ++c) padded(r, c) = W(r, c);
  }
  return d2s_project(padded, b);
}

Vector rect_mvm(const MonarchMatrix& M, std::size_t rows, std::span<const double> x) {
  if (x.size() > M.n() || rows > M.n()) throw DimensionError("rect_mvm: shape exceeds Monarch size");
  Vector xe(M.n(), 0.0);
  std::copy(x.begin(), x.end(), xe.begin());
  auto y = monarch_mvm(M, xe);
  y.resize(rows);
  return y;
}

namespace {

// P * F * P as CSR: entry (g, h) = F[p^-1(g)][p(h)].
SparseFactor fold_factor(const BlockDiagonalFactor& F, const PermutationSpec& p) {
  SparseFactor S;
  S.n = F.n();
  S.row_ptr.assign(S.n + 1, 0);
  S.col.reserve(F.nnz());
  S.val.reserve(F.nnz());
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t g = 0; g < S.n; ++g) {
    const std::size_t i = p.inverse(g);
    const std::size_t q = i / F.b;
    const std::size_t r = i % F.b;
    row.clear();
    for (std::size_t c = 0; c < F.b; ++c) {
      const std::size_t j = q * F.b + c;
      row.emplace_back(p.inverse(j), F.blocks[q](r, c));
    }
    std::sort(row.begin(), row.end());
    for (const auto& [h, v] : row) {
      S.col.push_back(h);
      S.val.push_back(v);
    }
    S.row_ptr[g + 1] = S.col.size();
  }
  return S;
}

}  // namespace

MonarchMatrix fold_permutations(const MonarchMatrix& M) {
  if (M.folded) return M;
  if (!M.perm.is_involution()) throw UnsupportedConfig("fold_permutations: requires b = sqrt(n)");
  MonarchMatrix F = M;
  F.L_folded = fold_factor(M.L, M.perm);
  F.R_folded = fold_factor(M.R, M.perm);
  F.folded = true;
  return F;
}

double rel_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("rel_error: length mismatch");
  double scale = 0.0;
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / std::max(scale, 1e-300);
}

}  // namespace cim::monarch
