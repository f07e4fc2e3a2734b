#include "cim/workload.hpp"

#include <algorithm>
#include <cmath>

#include "cim/errors.hpp"

namespace cim::workload {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Q: return "Q";
    case Role::K: return "K";
    case Role::V: return "V";
    case Role::O: return "O";
    case Role::FFN1: return "FFN1";
    case Role::FFN2: return "FFN2";
  }
  return "?";
}

ModelSpec builtin_model(std::string_view name) {
  if (name == "bert-large") return {"bert-large", 24, 1024, 4096, 512, 0, false};
  if (name == "gpt2-medium") return {"gpt2-medium", 24, 1024, 4096, 1024, 0, false};
  if (name == "bart-large") return {"bart-large", 24, 1024, 4096, 1024, 12, true};
  throw ConfigError("model", "unknown built-in model '" + std::string(name) + "'");
}

std::vector<std::string> builtin_names() { return {"bert-large", "bart-large", "gpt2-medium"}; }

std::vector<MatmulLayer> enumerate_matmuls(const ModelSpec& spec) {
  std::vector<MatmulLayer> out;
  const std::size_t dm = spec.d_model;
  const std::size_t first_decoder = spec.num_layers - std::min(spec.decoder_layers, spec.num_layers);
  for (std::size_t l = 0; l < spec.num_layers; ++l) {
    for (Role r : {Role::Q, Role::K, Role::V, Role::O}) out.push_back({dm, dm, 1, r, l, false});
    if (spec.cross_attention && l >= first_decoder) {
      for (Role r : {Role::Q, Role::K, Role::V, Role::O}) out.push_back({dm, dm, 1, r, l, true});
    }
    out.push_back({spec.d_ff, dm, 1, Role::FFN1, l, false});
    out.push_back({dm, spec.d_ff, 1, Role::FFN2, l, false});
  }
  return out;
}

MonarchShape monarch_shape(std::size_t rows, std::size_t cols) {
  const std::size_t n0 = std::max(rows, cols);
  auto b = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n0))));
  while (b > 0 && (b - 1) * (b - 1) >= n0) --b;
  while (b * b < n0) ++b;
  return {b * b, b};
}

double CountReport::param_ratio() const {
  return params_monarch == 0 ? 0.0 : static_cast<double>(params_dense) / static_cast<double>(params_monarch);
}

double CountReport::flop_ratio() const {
  return flops_monarch == 0 ? 0.0 : static_cast<double>(flops_dense) / static_cast<double>(flops_monarch);
}

CountReport count_params_flops(const ModelSpec& spec) {
  CountReport rep;
  const std::uint64_t seq = spec.seq_len;
  for (const auto& mm : enumerate_matmuls(spec)) {
    const auto shape = monarch_shape(mm.rows, mm.cols);
    const std::uint64_t k = mm.count_per_layer;
    rep.params_dense += k * mm.rows * mm.cols;
    rep.params_monarch += k * 2 * shape.n * shape.b;
    rep.flops_dense += k * 2 * seq * mm.rows * mm.cols;
    rep.flops_monarch += k * 4 * seq * shape.n * shape.b;
  }
  return rep;
}

}  // namespace cim::workload
