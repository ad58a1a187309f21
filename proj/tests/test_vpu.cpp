#include <doctest.h>

#include <cmath>

#include "beta/errors.hpp"
#include "beta/oracle.hpp"
#include "beta/random.hpp"
#include "beta/vpu.hpp"
#include "helpers.hpp"

using namespace beta;
using beta::test::fx;
using beta::test::ints;
using beta::test::real;

TEST_CASE("vpu_apply") {
  SUBCASE("unit coefficient casts the integer matrix") {
    const AffineOperand a{ints({{1, 2}, {3, 0}}, 2), fx(1.0), std::nullopt, Role::activation};
    const AffineOperand w{ints({{1, 0}, {1, 1}}, 1), fx(1.0), std::nullopt, Role::weight};
    const QmmPlan plan = make_plan(QmmKind::activation_weight, a, w);
    const Matrix<std::int32_t> mm = integer_matmul(a.payload, w.payload);
    const VpuResult r = vpu_apply(mm, plan, row_sums(a.payload), col_sums(w.payload), VpuConfig{});
    CHECK(r.stages == 1);
    CHECK(r.output.to_real() == mm.cast<double>());
  }
  SUBCASE("worked example") {
    const AffineOperand a{ints({{1, 0}, {0, 1}}, 1), fx(2.0), fx(1.0), Role::activation};
    const AffineOperand w{ints({{1, 1}, {1, 0}}, 1), fx(1.0), std::nullopt, Role::weight};
    const QmmPlan plan = make_plan(QmmKind::activation_weight, a, w);
    const VpuResult r = vpu_apply(integer_matmul(a.payload, w.payload), plan, row_sums(a.payload),
                                  col_sums(w.payload), VpuConfig{});
    CHECK(r.output == oracle::to_fixed16(oracle::exact_affine_mm(a, w), 8));
    CHECK(r.output.to_real() == real({{4, 3}, {4, 1}}));
    CHECK(r.stages == 2);
  }
  SUBCASE("cycles") {
    Rng rng(1);
    const AffineOperand a{random_payload(8, 4, 1, rng), fx(0.5), fx(0.25), Role::activation};
    const AffineOperand w{random_payload(4, 16, 1, rng), fx(0.5), std::nullopt, Role::weight};
    const QmmPlan plan = make_plan(QmmKind::activation_weight, a, w);
    const VpuResult r = vpu_apply(integer_matmul(a.payload, w.payload), plan, row_sums(a.payload),
                                  col_sums(w.payload), VpuConfig{});
    CHECK(r.stages == 2);
    CHECK(r.cycles == 4);  // 128 outputs / 64 lanes * 2 stages
  }
}

TEST_CASE("softmax") {
  const RealTensor u = softmax(real({{2, 2, 2, 2}}));
  for (Index j = 0; j < 4; ++j) CHECK(u(0, j) == doctest::Approx(0.25).epsilon(1e-15));
  const RealTensor p = softmax(real({{0, std::log(3.0)}}));
  CHECK(p(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p(0, 1) == doctest::Approx(0.75).epsilon(1e-15));
  Rng rng(3);
  const RealTensor x = random_normal(3, 7, 2.0, rng);
  const RealTensor shifted = (x.array() + 11.5).matrix();
  CHECK((softmax(x) - softmax(shifted)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((softmax(x).rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("layernorm and gelu") {
  const RealTensor z = layernorm(real({{1, 1, 1, 1}}), Eigen::RowVectorXd::Ones(4), Eigen::RowVectorXd::Zero(4));
  CHECK(z.isZero());
  const RealTensor y = layernorm(real({{1, 3}}), Eigen::RowVectorXd::Ones(2), Eigen::RowVectorXd::Zero(2));
  // mean 2, variance 1
  CHECK(y(0, 0) == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)));
  CHECK_THROWS(layernorm(real({{1}}), Eigen::RowVectorXd::Ones(1), Eigen::RowVectorXd::Zero(1)));

  CHECK(gelu(real({{0}}))(0, 0) == 0.0);
  // 2 * Phi(2), Phi(2) = 0.97724986805182079...
  CHECK(gelu(real({{2}}))(0, 0) == doctest::Approx(1.9544997361036416).epsilon(1e-15));
}

TEST_CASE("quantize") {
  SUBCASE("min-max, 2 bits") {
    const AffineOperand q = quantize(real({{0, 1, 2, 3}}), 2, QuantScheme::minmax_affine);
    CHECK(q.scale.to_double() == 1.0);
    CHECK(q.offset_or_zero().to_double() == 0.0);
    CHECK(q.payload == ints({{0, 1, 2, 3}}, 2));
  }
  SUBCASE("constant tensor") {
    const AffineOperand q = quantize(RealTensor::Constant(2, 3, 1.25), 4, QuantScheme::minmax_affine);
    CHECK(q.scale == Fixed16::smallest_positive(8));
    CHECK(q.payload == IntMatrix(2, 3, 4));
    CHECK((dequantize(q).array() - 1.25).abs().maxCoeff() <= 1.0 / 256);
  }
  SUBCASE("sign-binary") {
    const AffineOperand q = quantize(real({{-1, 0.5, 2, -0.5}}), 1, QuantScheme::sign_binary);
    CHECK(q.payload == ints({{0, 1, 1, 0}}, 1));
    CHECK(q.scale.to_double() == 2.0);
    CHECK(q.offset_or_zero().to_double() == -1.0);
    CHECK(dequantize(q) == real({{-1, 1, 1, -1}}));
    CHECK_THROWS(quantize(real({{1, 2}}), 2, QuantScheme::sign_binary));
  }
  SUBCASE("round trip stays within half a step plus one ULP") {
    Rng rng(21);
    for (int bits : {1, 2, 4, 8}) {
      for (int t = 0; t < 50; ++t) {
        const RealTensor x = random_normal(5, 6, 3.0, rng);
        const AffineOperand q = quantize(x, bits, QuantScheme::minmax_affine);
        const double bound = q.scale.to_double() / 2 + 1.0 / 256;
        REQUIRE((dequantize(q) - x).cwiseAbs().maxCoeff() <= bound);
      }
    }
  }
  CHECK(parse_quant_scheme("sign") == QuantScheme::sign_binary);
  CHECK(parse_quant_scheme("minmax") == QuantScheme::minmax_affine);
  CHECK_THROWS_AS(parse_quant_scheme("lsq"), ConfigError);
}
