#pragma once

// Monarch matrices: M = P * L * P * R * P with L, R block-diagonal and P the
// fixed "reshape-transpose" permutation.  Everything here is 64-bit and pure.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace cim::monarch {

using Vector = std::vector<double>;

/// Thread-local operation counters.  Open a CountingScope to observe the
/// flops and explicit permutations executed on the current thread.
struct OpCounts {
  std::uint64_t flops = 0;
  std::uint64_t permutations = 0;
};

class CountingScope {
 public:
  CountingScope();
  ~CountingScope();
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;
  const OpCounts& counts() const { return counts_; }

 private:
  OpCounts counts_;
  OpCounts* previous_;
};

namespace detail {
void count_flops(std::uint64_t n);
void count_permutation();
}  // namespace detail

/// Maps k = q*b + r to r*d + q (transpose of the d x b reshape of a vector).
struct PermutationSpec {
  std::size_t n = 1;
  std::size_t b = 1;
  std::size_t d = 1;

  static PermutationSpec make(std::size_t n, std::size_t b);
  std::size_t map(std::size_t k) const { return (k % b) * d + k / b; }
  std::size_t inverse(std::size_t k) const { return (k % d) * b + k / d; }
  bool is_involution() const { return b == d; }
};

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix random(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Vector matvec(std::span<const double> x) const;
  double frobenius() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct BlockDiagonalFactor {
  std::size_t b = 1;
  std::size_t d = 1;
  std::vector<DenseMatrix> blocks;

  std::size_t n() const { return b * d; }
  std::size_t nnz() const { return d * b * b; }

  static BlockDiagonalFactor identity(std::size_t b, std::size_t d);
  static BlockDiagonalFactor zeros(std::size_t b, std::size_t d);
  static BlockDiagonalFactor random(std::size_t b, std::size_t d, std::mt19937_64& rng);
};

/// Explicit CSR storage used for the permutation-folded factors P*L*P and P*R*P.
struct SparseFactor {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }
  Vector apply(std::span<const double> x) const;
};

struct MonarchMatrix {
  BlockDiagonalFactor L;
  BlockDiagonalFactor R;
  PermutationSpec perm;
  bool folded = false;
  // Populated by fold_permutations(); L and R keep the block form used by mapping.
  std::optional<SparseFactor> L_folded;
  std::optional<SparseFactor> R_folded;

  std::size_t n() const { return perm.n; }
  std::size_t b() const { return L.b; }

  static MonarchMatrix make(BlockDiagonalFactor L, BlockDiagonalFactor R);
  static MonarchMatrix random(std::size_t n, std::size_t b, std::mt19937_64& rng);
};

Vector permute(std::span<const double> x, const PermutationSpec& spec);
Vector block_diag_mvm(const BlockDiagonalFactor& f, std::span<const double> x);
Vector monarch_mvm(const MonarchMatrix& M, std::span<const double> x);
DenseMatrix expand_to_dense(const MonarchMatrix& M);

struct Rank1 {
  Vector u;
  Vector v;
  double residual = 0.0;
  double sigma = 0.0;
  int iterations = 0;
};

inline constexpr double kRank1Tolerance = 1e-12;
inline constexpr int kRank1MaxIterations = 2000;

/// Best rank-1 Frobenius approximation u*v^T of A via power iteration on A^T A.
/// The singular value is split evenly: |u| = |v| = sqrt(sigma).
Rank1 rank1_approx(const DenseMatrix& A);

struct Projection {
  MonarchMatrix M;
  double error = 0.0;
};

/// Frobenius-optimal projection of a square n x n matrix onto the Monarch class
/// with block size b (b*b == n).
Projection d2s_project(const DenseMatrix& W, std::size_t b);

/// Rectangular weights: zero-extend to n = max(rows, cols) and project.
/// Requires max(rows, cols) to be a perfect square.
Projection d2s_project_rect(const DenseMatrix& W);
/// y = first `rows` entries of M * [x; 0].
Vector rect_mvm(const MonarchMatrix& M, std::size_t rows, std::span<const double> x);

MonarchMatrix fold_permutations(const MonarchMatrix& M);

/// Max |a - b| / max(|b|_inf, tiny).
double rel_error(std::span<const double> a, std::span<const double> b);

}  // namespace cim::monarch
