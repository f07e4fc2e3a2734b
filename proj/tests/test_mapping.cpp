#include <doctest.h>

#include <random>
#include <set>

#include "cim/errors.hpp"
#include "cim/mapping.hpp"
#include "cim/workload.hpp"

using namespace cim;
using namespace cim::mapping;

namespace {

std::vector<workload::MatmulLayer> bert() {
  return workload::enumerate_matmuls(workload::builtin_model("bert-large"));
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

TEST_SUITE("mapping") {
  TEST_CASE("linear tiling") {
    const std::vector<DenseShape> one{{256, 256}};
    CHECK(map_linear(one, 256).num_arrays == 1);
    const std::vector<DenseShape> sq{{1024, 1024}};
    CHECK(map_linear(sq, 256).num_arrays == 16);
    const std::vector<DenseShape> odd{{300, 100}};
    const auto p = map_linear(odd, 256);
    CHECK(p.num_arrays == 2);
    CHECK(validate(p).empty());

    const auto d = dense_workload(bert());
    std::size_t tiles = 0;
    for (const auto& s : d) tiles += ceil_div(s.rows, 256) * ceil_div(s.cols, 256);
    const auto plan = map_linear(d, 256);
    CHECK(plan.num_arrays == tiles);
    CHECK(plan.num_arrays == 4608);
    CHECK(utilization(plan).mean == doctest::Approx(1.0));
    CHECK(validate(plan).empty());
  }

  TEST_CASE("sparse mapping keeps blocks on the diagonal") {
    const std::vector<workload::MonarchShape> s{{1024, 32}};
    const auto p = map_sparse(s, 256);
    // 32 blocks per factor, 8 per array.
    CHECK(p.num_arrays == 2 * ceil_div(32, 256 / 32));
    for (const auto& pl : p.placements) CHECK(pl.row_offset == pl.col_offset);
    const auto u = utilization(p);
    CHECK(u.mean == doctest::Approx(0.125));
    CHECK(validate(p).empty());

    const auto full = map_sparse(monarch_workload(bert()), 256);
    CHECK(full.num_arrays == 24 * (4 * 8 + 2 * 32));
    CHECK(validate(full).empty());

    const std::vector<workload::MonarchShape> big{{4096 * 16, 256 * 2}};
    CHECK_THROWS_AS(map_sparse(big, 256), UnsupportedConfig);
    const std::vector<workload::MonarchShape> uneven{{3136, 56}};
    CHECK_THROWS_AS(map_sparse(uneven, 256), UnsupportedConfig);
  }

  TEST_CASE("dense packing of a single matrix") {
    const std::vector<workload::MonarchShape> s{{1024, 32}};
    const auto packed = map_dense(s, 256, {.reserve_half_slot = false});
    CHECK(packed.num_arrays == 1);
    CHECK(utilization(packed).mean == doctest::Approx(1.0));
    CHECK(validate(packed).empty());

    const auto reserved = map_dense(s, 256);
    CHECK(reserved.num_arrays == 2);
    CHECK(validate(reserved).empty());
    for (const auto& pl : reserved.placements) {
      REQUIRE(pl.diagonal_index.has_value());
      CHECK(*pl.diagonal_index != 4);
    }
  }

  TEST_CASE("pairing rule") {
    const auto p = map_dense(monarch_workload(bert()), 256);
    CHECK(validate(p).empty());
    REQUIRE_FALSE(p.pairings.empty());
    for (const auto& pr : p.pairings) {
      const auto ds = p.d_slots(pr.matmul);
      CHECK(pr.i_L == (ds - pr.i_R) % ds);
      CHECK(pr.explicit_correction == (pr.i_L == pr.i_R));
    }
    const auto shifts = input_group_shifts(p, 0);
    CHECK(shifts.size() == 4);
  }

  TEST_CASE("utilization ordering on BERT") {
    const auto mm = bert();
    const auto lin = map_linear(dense_workload(mm), 256);
    const auto sp = map_sparse(monarch_workload(mm), 256);
    const auto de = map_dense(monarch_workload(mm), 256);
    CHECK(de.num_arrays < sp.num_arrays);
    CHECK(sp.num_arrays < lin.num_arrays);
    CHECK(utilization(sp).mean < utilization(de).mean);
    CHECK(utilization(de).mean <= utilization(lin).mean);
    // Nonzeros stored equal the Monarch parameter count for both sparse layouts.
    const auto counts = workload::count_params_flops(workload::builtin_model("bert-large"));
    CHECK(utilization(sp).nnz_total == counts.params_monarch);
    CHECK(utilization(de).nnz_total == counts.params_monarch);
  }

  TEST_CASE("programmed cells hold the block entries") {
    std::mt19937_64 rng(5);
    const std::vector<monarch::MonarchMatrix> mats{monarch::MonarchMatrix::random(64, 8, rng)};
    const std::vector<workload::MonarchShape> s{{64, 8}};
    const auto p = map_sparse(s, 32);
    const auto arrays = program_arrays(p, mats);
    REQUIRE(arrays.size() == p.num_arrays);
    for (const auto& pl : p.placements) {
      const auto& f = pl.source.factor == Factor::L ? mats[0].L : mats[0].R;
      const auto& blk = f.blocks[pl.source.index];
      for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 8; ++c)
          CHECK(arrays[pl.array_id].cell(pl.row_offset + r, pl.col_offset + c) == blk(c, r));
    }
  }

  TEST_CASE("serialize round trip") {
    const auto p = map_dense(monarch_workload(bert()), 256);
    const auto text = serialize(p);
    const auto q = parse_plan(text);
    CHECK(q.num_arrays == p.num_arrays);
    CHECK(q.placements.size() == p.placements.size());
    CHECK(q.pairings.size() == p.pairings.size());
    CHECK(serialize(q) == text);
    CHECK_THROWS_AS(parse_plan("plan bogus m=1 arrays=0 compensation=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_plan("place 0 0\n"), ConfigError);
  }

  TEST_CASE("empty workload") {
    const auto p = map_sparse(std::vector<workload::MonarchShape>{}, 256);
    CHECK(p.num_arrays == 0);
    CHECK(utilization(p).empty);
    CHECK(validate(p).empty());
  }

  TEST_CASE("validate catches overlap") {
    const std::vector<workload::MonarchShape> s{{1024, 32}};
    auto p = map_sparse(s, 256);
    p.placements[1].row_offset = p.placements[0].row_offset;
    p.placements[1].col_offset = p.placements[0].col_offset;
    CHECK_FALSE(validate(p).empty());
  }
}
