#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cim/crossbar.hpp"
#include "cim/errors.hpp"

using namespace cim;
using namespace cim::xbar;

TEST_SUITE("crossbar") {
  TEST_CASE("programming") {
    CrossbarArray a(4, 7);
    CHECK(a.id() == 7);
    CHECK_FALSE(a.programmed());
    const std::vector<CellWrite> w{{0, 1, 2.0}, {3, 3, -1.5}};
    a.program(w);
    CHECK(a.programmed());
    CHECK(a.cell(0, 1) == 2.0);
    CHECK(a.cell(1, 1) == 0.0);
    CHECK(a.nonzero_cells() == 2);
    CHECK(a.max_abs_cell() == 2.0);

    CrossbarArray b(4, 0);
    CHECK_THROWS_AS(b.program(std::vector<CellWrite>{{4, 0, 1.0}}), DimensionError);
    CHECK_THROWS_AS(b.program(std::vector<CellWrite>{{1, 1, 1.0}, {1, 1, 2.0}}), DimensionError);
    CHECK_THROWS_AS(b.program(std::vector<CellWrite>{{1, 1, INFINITY}}), DimensionError);
    CHECK_FALSE(b.programmed());
  }

  TEST_CASE("masked step sums only the active rows") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    CrossbarArray a(5, 0);
    std::vector<CellWrite> w;
    std::vector<std::vector<double>> cells(5, std::vector<double>(5));
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 5; ++c) w.push_back({r, c, cells[r][c] = u(rng)});
    a.program(w);
    std::vector<double> x(5);
    for (auto& v : x) v = u(rng);
    const ActivationMask mask{{0, 2, 3}, {1, 4}};
    const auto y = mvm_step(a, x, mask);
    for (std::size_t c = 0; c < 5; ++c) {
      double ref = 0.0;
      if (c == 1 || c == 4)
        for (std::size_t r : {0, 2, 3}) ref += x[r] * cells[r][c];
      CHECK(y[c] == doctest::Approx(ref).epsilon(1e-15));
    }
    CHECK_THROWS_AS(mvm_step(a, x, ActivationMask{{}, {1}}), DimensionError);
    CHECK_THROWS_AS(mvm_step(a, std::vector<double>(4), mask), DimensionError);
  }

  TEST_CASE("ADC configuration and quantizer") {
    ADCConfig cfg;
    CHECK_NOTHROW(cfg.validate(256));
    cfg.adcs_per_array = 0;
    CHECK_THROWS_AS(cfg.validate(256), UnsupportedConfig);
    cfg.adcs_per_array = 300;
    CHECK_THROWS_AS(cfg.validate(256), UnsupportedConfig);
    cfg = {};
    cfg.bits = 9;
    CHECK_THROWS_AS(cfg.validate(256), UnsupportedConfig);

    ADCConfig q{1, 2, AdcMode::quantized, 1.0};
    CHECK(q.step() == 0.5);
    CHECK(quantize(0.3, q) == 0.5);
    CHECK(quantize(-0.2, q) == 0.0);
    CHECK(quantize(7.0, q) == 1.0);
    CHECK(quantize(-7.0, q) == -1.0);
    ADCConfig one{1, 1, AdcMode::quantized, 1.0};
    CHECK(quantize(0.7, one) == 1.0);
    ADCConfig ideal;
    CHECK(quantize(0.123456789, ideal) == 0.123456789);
    ADCConfig broken{1, 4, AdcMode::quantized, 0.0};
    CHECK_THROWS_AS(quantize(0.5, broken), UnsupportedConfig);

    const std::vector<double> col{0.1, 0.2, 0.3};
    const std::vector<std::size_t> which{2, 0};
    const auto r = adc_convert(col, which, ideal);
    CHECK(r.conversions == 2);
    CHECK(r.values == std::vector<double>{0.3, 0.1});
  }
}
