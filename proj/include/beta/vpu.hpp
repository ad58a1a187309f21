#pragma once

#include <cstdint>
#include <string_view>

#include "beta/abstraction.hpp"
#include "beta/matrix.hpp"

namespace beta {

/// Vector processing unit: FIX-16 coefficient multiplies and offset adds.
/// The default width of 64 lanes follows the unit's 64 DSP slices.
struct VpuConfig {
  int vector_width = 64;
  int frac_bits = kDefaultFracBits;
  // The VPU consumes engine outputs as they stream out; only cycles beyond the
  // producing QMM's compute + drain are exposed.
  bool overlap = true;

  void validate() const;
};

struct VpuResult {
  FixedMatrix output;
  std::int64_t cycles = 0;
  int stages = 0;
};

// Applies the plan's fused terms; cycles = ceil(M * N / V) * nonzero terms.
// Saturation is counted in `sat`, never fatal.
VpuResult vpu_apply(const Matrix<std::int32_t>& intmm, const QmmPlan& plan, const Vector<std::int32_t>& lhs_row_sums,
                    const Vector<std::int32_t>& rhs_sum, const VpuConfig& config, OpCounter* counter = nullptr,
                    SaturationCounter* sat = nullptr);

// Row-wise exp(x - max) / sum exp(x - max).
RealTensor softmax(const RealTensor& rows);
// (x - mean) / sqrt(var + eps) * gain + bias per row, population variance.
RealTensor layernorm(const RealTensor& rows, const Eigen::RowVectorXd& gain, const Eigen::RowVectorXd& bias,
                     double eps = 1e-5);
// 0.5 x (1 + erf(x / sqrt 2)).
RealTensor gelu(const RealTensor& x);

enum class QuantScheme { minmax_affine, sign_binary };

const char* to_string(QuantScheme scheme);
QuantScheme parse_quant_scheme(std::string_view name);

/// Host-side quantizer producing a b-bit payload with FIX-16 scale and offset.
///
/// minmax_affine: scale = (max - min) / (2^b - 1) rounded up, offset = min, payload =
/// clamp(round((x - offset) / scale)). sign_binary (b = 1): payload = [x >= 0],
/// scale = 2s, offset = -s with s = mean |x|. A tensor whose elements are all
/// equal takes the smallest positive scale, an all-zero payload and offset =
/// that value.
AffineOperand quantize(const RealTensor& x, int bits, QuantScheme scheme, Role role = Role::activation,
                       int frac_bits = kDefaultFracBits, SaturationCounter* sat = nullptr);

}  // namespace beta
