#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cim::workload {

struct ModelSpec {
  std::string name;
  std::size_t num_layers = 0;  // total, encoder + decoder
  std::size_t d_model = 0;
  std::size_t d_ff = 0;
  std::size_t seq_len = 0;
  std::size_t decoder_layers = 0;  // subset of num_layers that carries cross-attention
  bool cross_attention = false;
};

enum class Role { Q, K, V, O, FFN1, FFN2 };
std::string_view to_string(Role r);

/// One parameterized matmul y = W x with W rows x cols.
struct MatmulLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t count_per_layer = 1;
  Role role = Role::Q;
  std::size_t layer = 0;
  bool cross = false;
};

/// Built-ins: bert-large, bart-large, gpt2-medium.  Throws ConfigError otherwise.
ModelSpec builtin_model(std::string_view name);
std::vector<std::string> builtin_names();

std::vector<MatmulLayer> enumerate_matmuls(const ModelSpec& spec);

/// Square Monarch shape used for a (possibly rectangular) matmul:
/// n = max(rows, cols) rounded up to a perfect square, b = sqrt(n).
struct MonarchShape {
  std::size_t n = 0;
  std::size_t b = 0;
};
MonarchShape monarch_shape(std::size_t rows, std::size_t cols);

struct CountReport {
  std::uint64_t params_dense = 0;
  std::uint64_t params_monarch = 0;
  std::uint64_t flops_dense = 0;
  std::uint64_t flops_monarch = 0;
  double param_ratio() const;
  double flop_ratio() const;
};

/// Parameters and one-forward-pass FLOPs at seq_len tokens, dense and Monarch side by side.
CountReport count_params_flops(const ModelSpec& spec);

inline constexpr std::string_view kCountingConvention =
    "parameterized matmuls only (Q,K,V,O,FFN1,FFN2 + decoder cross-attention); "
    "monarch n=max(rows,cols), b=sqrt(n), 2*n*b params and 4*seq*n*b flops per matmul; "
    "permutations 0 flops; embeddings/LM head excluded";

}  // namespace cim::workload
