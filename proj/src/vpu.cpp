#include "beta/vpu.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "beta/errors.hpp"

namespace beta {

void VpuConfig::validate() const {
  if (vector_width < 1) throw ConfigError("vpu.vector_width", "must be >= 1");
  if (frac_bits < 0 || frac_bits > 15) throw ConfigError("vpu.frac_bits", "must lie in [0, 15]");
}

VpuResult vpu_apply(const Matrix<std::int32_t>& intmm, const QmmPlan& plan, const Vector<std::int32_t>& lhs_row_sums,
                    const Vector<std::int32_t>& rhs_sum, const VpuConfig& config, OpCounter* counter,
                    SaturationCounter* sat) {
  VpuResult r;
  r.output = apply_fused(plan, intmm, lhs_row_sums, rhs_sum, counter, sat);
  r.stages = plan.term_count();
  const std::int64_t elements = plan.m * plan.n;
  r.cycles = (elements + config.vector_width - 1) / config.vector_width * r.stages;
  return r;
}

RealTensor softmax(const RealTensor& rows) {
  RealTensor out(rows.rows(), rows.cols());
  for (Index i = 0; i < rows.rows(); ++i) {
    const Eigen::RowVectorXd e = (rows.row(i).array() - rows.row(i).maxCoeff()).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

RealTensor layernorm(const RealTensor& rows, const Eigen::RowVectorXd& gain, const Eigen::RowVectorXd& bias,
                     double eps) {
  if (rows.cols() < 2) throw DimensionError("layernorm needs rows of length >= 2");
  if (gain.size() != rows.cols() || bias.size() != rows.cols()) {
    throw DimensionError("layernorm gain/bias length differs from the row length");
  }
  RealTensor out(rows.rows(), rows.cols());
  for (Index i = 0; i < rows.rows(); ++i) {
    const Eigen::RowVectorXd centered = rows.row(i).array() - rows.row(i).mean();
    const double var = centered.squaredNorm() / static_cast<double>(rows.cols());
    out.row(i) = (centered.array() / std::sqrt(var + eps)) * gain.array() + bias.array();
  }
  return out;
}

RealTensor gelu(const RealTensor& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
}

const char* to_string(QuantScheme scheme) {
  return scheme == QuantScheme::minmax_affine ? "minmax" : "sign";
}

QuantScheme parse_quant_scheme(std::string_view name) {
  if (name == "minmax" || name == "minmax-affine" || name == "minmax_affine") return QuantScheme::minmax_affine;
  if (name == "sign" || name == "sign-binary" || name == "sign_binary") return QuantScheme::sign_binary;
  throw ConfigError("quant.scheme", "unknown quantizer `" + std::string(name) + "` (expected minmax or sign)");
}

AffineOperand quantize(const RealTensor& x, int bits, QuantScheme scheme, Role role, int frac_bits,
                       SaturationCounter* sat) {
  if (!is_supported_bit_width(bits)) throw EncodingError("unsupported quantization width " + std::to_string(bits));
  if (scheme == QuantScheme::sign_binary && bits != 1) throw EncodingError("sign-binary quantization is 1-bit");
  if (x.size() == 0) throw DimensionError("cannot quantize an empty tensor");
  if (!x.allFinite()) throw EncodingError("cannot quantize a tensor with non-finite elements");

  const double lo = x.minCoeff();
  const double hi = x.maxCoeff();
  if (lo == hi) {
    return {IntMatrix(x.rows(), x.cols(), bits), Fixed16::smallest_positive(frac_bits),
            Fixed16::from_double(lo, frac_bits, sat), role};
  }

  if (scheme == QuantScheme::sign_binary) {
    const Fixed16 s = Fixed16::from_double(x.cwiseAbs().mean(), frac_bits, sat);
    const Matrix<std::uint8_t> payload = (x.array() >= 0.0).cast<std::uint8_t>();
    return {IntMatrix(payload, 1), fx_add(s, s, sat), fx_sub(Fixed16::zero(frac_bits), s, sat), role};
  }

  const int levels = (1 << bits) - 1;
  // Rounded up so that offset + scale * levels still reaches max; a scale
  // rounded down would push the top of the range into the clamp.
  const double scale_raw = std::max(1.0, std::ceil(std::ldexp((hi - lo) / levels, frac_bits)));
  const Fixed16 scale{saturate16(static_cast<__int128>(std::min(scale_raw, 65536.0)), sat), frac_bits};
  const Fixed16 offset = Fixed16::from_double(lo, frac_bits, sat);
  const double s = scale.to_double();
  const double o = offset.to_double();
  const Matrix<std::uint8_t> payload = x.unaryExpr([&](double v) {
    const double q = std::nearbyint((v - o) / s);
    return static_cast<std::uint8_t>(std::clamp(q, 0.0, static_cast<double>(levels)));
  });
  return {IntMatrix(payload, bits), scale, offset, role};
}

}  // namespace beta
