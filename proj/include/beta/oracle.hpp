#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "beta/exact.hpp"
#include "beta/matrix.hpp"
#include "beta/pipeline.hpp"

namespace beta::oracle {

// Decoded (M x K) * (K x N) product in exact rational arithmetic.
Matrix<ExactScalar> exact_affine_mm(const AffineOperand& lhs, const AffineOperand& rhs);
// Decoded (M x K) * (N x K)^T product, the activation x activation form.
Matrix<ExactScalar> exact_affine_gram(const AffineOperand& lhs, const AffineOperand& rhs_t);

// Round to nearest-even at `frac_bits`, then saturate.
Fixed16 to_fixed16(const ExactScalar& value, int frac_bits, SaturationCounter* sat = nullptr);
FixedMatrix to_fixed16(const Matrix<ExactScalar>& values, int frac_bits, SaturationCounter* sat = nullptr);

std::int64_t plain_dot(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
Matrix<std::int64_t> plain_integer_mm(const IntMatrix& lhs, const IntMatrix& rhs);

/// Straight-line reference for one block: the same quantizers and rounding
/// points as the pipeline, with every QMM computed as an exact rational
/// product rounded once to FIX-16. No engine, packing or carry-save model.
RealTensor reference_block(const RealTensor& x, const BlockWeights& weights, const LayerSpec& spec,
                           QuantScheme scheme, int frac_bits = kDefaultFracBits, const QmmTap& tap = {});
RealTensor reference_model(const Model& model, const RealTensor& x, QuantScheme scheme,
                           int frac_bits = kDefaultFracBits, const QmmTap& tap = {});

}  // namespace beta::oracle
