#include <doctest.h>

#include <random>
#include <sstream>

#include "beta/errors.hpp"
#include "beta/matrix.hpp"
#include "beta/oracle.hpp"
#include "beta/random.hpp"
#include "helpers.hpp"

using namespace beta;
using beta::test::fx;
using beta::test::ints;

TEST_CASE("fx_mul examples") {
  CHECK(fx_mul({256, 8}, {256, 8}).raw() == 256);
  CHECK(fx_mul({384, 8}, {512, 8}).raw() == 768);

  // exact product 32767 * 512 / 256 = 65534 > 32767
  SaturationCounter sat;
  CHECK(fx_mul({32767, 8}, {512, 8}, &sat).raw() == 32767);
  CHECK(sat.events == 1);
  CHECK(fx_mul({-32768, 8}, {512, 8}, &sat).raw() == -32768);
  CHECK(sat.events == 2);
}

TEST_CASE("mixed fraction bits are rejected") {
  CHECK_THROWS_AS(fx_mul({1, 8}, {1, 7}), EncodingError);
  CHECK_THROWS_AS(fx_add({1, 8}, {1, 7}), EncodingError);
  CHECK_THROWS_AS(check_frac_bits(16), EncodingError);
}

TEST_CASE("round_shift_even ties go to even") {
  CHECK(round_shift_even(5, 1) == 2);    // 2.5
  CHECK(round_shift_even(7, 1) == 4);    // 3.5
  CHECK(round_shift_even(-5, 1) == -2);  // -2.5
  CHECK(round_shift_even(-7, 1) == -4);
  CHECK(round_shift_even(6, 2) == 2);    // 1.5
  CHECK(round_shift_even(-3, 2) == -1);  // -0.75
  CHECK(round_shift_even(9, 0) == 9);
}

TEST_CASE("from_double rounds to nearest even and saturates") {
  CHECK(Fixed16::from_double(1.5 / 256, 8).raw() == 2);
  CHECK(Fixed16::from_double(2.5 / 256, 8).raw() == 2);
  CHECK(Fixed16::from_double(-0.5 / 256, 8).raw() == 0);
  SaturationCounter sat;
  CHECK(Fixed16::from_double(1e6, 8, &sat).raw() == 32767);
  CHECK(Fixed16::from_double(-1e6, 8, &sat).raw() == -32768);
  CHECK(sat.events == 2);
  CHECK(Fixed16::from_double(1.0, 8).to_double() == 1.0);
}

TEST_CASE("fixed-point arithmetic matches the rational oracle over 10^6 pairs") {
  Rng rng(20240601);
  std::uniform_int_distribution<int> raw(-32768, 32767);
  std::uniform_int_distribution<int> frac(0, 15);
  int mismatches = 0;
  for (int t = 0; t < 1'000'000; ++t) {
    const int f = frac(rng);
    const Fixed16 a{static_cast<std::int16_t>(raw(rng)), f};
    const Fixed16 b{static_cast<std::int16_t>(raw(rng)), f};
    const ExactScalar ea = ExactScalar(a.raw()) / ExactScalar(BigInt(1) << f);
    const ExactScalar eb = ExactScalar(b.raw()) / ExactScalar(BigInt(1) << f);
    if (fx_mul(a, b) != oracle::to_fixed16(ea * eb, f)) ++mismatches;
    if ((t & 7) == 0) {
      if (fx_add(a, b) != oracle::to_fixed16(ea + eb, f)) ++mismatches;
      if (fx_sub(a, b) != oracle::to_fixed16(ea - eb, f)) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("FixedProduct keeps the exact product") {
  const FixedProduct p = fx_product(fx(0.5), fx(-0.25));
  CHECK(p.frac_bits == 16);
  CHECK(p.to_double() == -0.125);
  const FixedProduct q = fx_product(p, fx(3.0));
  CHECK(q.frac_bits == 24);
  CHECK(q.to_double() == -0.375);
  CHECK(q.rounded(8).raw() == -96);
}

TEST_CASE("pack and unpack") {
  SUBCASE("1x1") {
    Matrix<std::uint8_t> m(1, 1);
    m << 1;
    const BinaryMatrix p = pack(m);
    CHECK(p.row_words(0)[0] == 1u);
    CHECK(unpack(p) == m);
  }
  SUBCASE("2x2 identity") {
    Matrix<std::uint8_t> m(2, 2);
    m << 1, 0, 0, 1;
    const BinaryMatrix p = pack(m);
    CHECK(p.row_words(0)[0] == 0b01u);
    CHECK(p.row_words(1)[0] == 0b10u);
    CHECK(unpack(p) == m);
  }
  SUBCASE("3x70 random round trips") {
    Rng rng(7);
    for (int t = 0; t < 1000; ++t) {
      const IntMatrix r = random_payload(3, 70, 1, rng);
      REQUIRE(unpack(pack(r.data())) == r.data());
      REQUIRE(to_int(to_binary(r)) == r);
    }
  }
  SUBCASE("non-binary element") {
    Matrix<std::uint8_t> m(1, 2);
    m << 1, 2;
    CHECK_THROWS_AS(pack(m), EncodingError);
  }
}

TEST_CASE("IntMatrix validates widths and ranges") {
  CHECK_THROWS_AS(IntMatrix(2, 2, 3), EncodingError);
  CHECK_THROWS_AS(ints({{4}}, 2), EncodingError);
  CHECK_THROWS_AS(ints({{-1}}, 8), EncodingError);
  CHECK_NOTHROW(ints({{255}}, 8));
}

TEST_CASE("decode") {
  CHECK(decode({ints({{1}}, 1), fx(1.0), fx(0.0), Role::weight}, 0, 0) == 1);
  const AffineOperand pm{ints({{1, 0}}, 1), fx(2.0), fx(-1.0), Role::weight};
  CHECK(decode(pm, 0, 0) == 1);
  CHECK(decode(pm, 0, 1) == -1);
  // 5 * 0.25 + 0.5
  CHECK(decode({ints({{5}}, 4), fx(0.25), fx(0.5), Role::activation}, 0, 0) == ExactScalar(7, 4));
  CHECK_THROWS_AS(decode(pm, 1, 0), DimensionError);
}

TEST_CASE("row and column sums") {
  CHECK(col_sums(ints({{1, 0}, {0, 1}}, 1)) == Vector<std::int32_t>::Ones(2));
  Vector<std::int32_t> want(2);
  want << 2, 1;
  CHECK(col_sums(ints({{1, 1}, {1, 0}}, 1)) == want);
  CHECK(row_sums(ints({{1, 1}, {1, 0}}, 1)) == want);
  const IntMatrix z(8, 8, 4);
  CHECK(row_sums(z).isZero());
  CHECK(col_sums(z).isZero());
}

TEST_CASE("matrix text format") {
  const IntMatrix m = ints({{1, 2, 3}, {4, 5, 6}}, 4);
  std::stringstream ss;
  format_matrix(ss, m);
  CHECK(parse_matrix(ss) == m);

  std::stringstream short_body("2 2 1\n1 0 1");
  CHECK_THROWS_AS(parse_matrix(short_body), EncodingError);
  std::stringstream out_of_range("1 1 1\n2");
  CHECK_THROWS_AS(parse_matrix(out_of_range), EncodingError);
}
