#include "beta/fixed16.hpp"

#include <cmath>
#include <string>

#include "beta/errors.hpp"

namespace beta {

__int128 round_shift_even(__int128 value, int shift) {
  if (shift <= 0) return value << -shift;
  const __int128 quotient = value >> shift;  // floor
  const __int128 remainder = value - (quotient << shift);
  const __int128 half = static_cast<__int128>(1) << (shift - 1);
  if (remainder > half) return quotient + 1;
  if (remainder == half) return quotient + (quotient & 1);
  return quotient;
}

std::int16_t saturate16(__int128 value, SaturationCounter* sat) {
  if (value > kFixed16Max) {
    if (sat) ++sat->events;
    return static_cast<std::int16_t>(kFixed16Max);
  }
  if (value < kFixed16Min) {
    if (sat) ++sat->events;
    return static_cast<std::int16_t>(kFixed16Min);
  }
  return static_cast<std::int16_t>(value);
}

void check_frac_bits(int frac_bits) {
  if (frac_bits < 0 || frac_bits > 15) {
    throw EncodingError("FIX-16 fraction bits must lie in [0, 15], got " + std::to_string(frac_bits));
  }
}

namespace {

void require_same_format(Fixed16 a, Fixed16 b) {
  if (a.frac_bits() != b.frac_bits()) {
    throw EncodingError("FIX-16 operands disagree on fraction bits (" + std::to_string(a.frac_bits()) + " vs " +
                        std::to_string(b.frac_bits()) + ")");
  }
}

}  // namespace

Fixed16 Fixed16::from_double(double value, int frac_bits, SaturationCounter* sat) {
  check_frac_bits(frac_bits);
  if (!std::isfinite(value)) throw EncodingError("cannot encode a non-finite value as FIX-16");
  const double scaled = std::ldexp(value, frac_bits);
  if (scaled >= 65536.0) return {saturate16(kFixed16Max + 1, sat), frac_bits};
  if (scaled <= -65536.0) return {saturate16(kFixed16Min - 1, sat), frac_bits};
  // The default floating-point environment rounds to nearest, ties to even.
  const auto rounded = static_cast<std::int64_t>(std::nearbyint(scaled));
  return {saturate16(rounded, sat), frac_bits};
}

Fixed16 Fixed16::from_int(std::int64_t value, int frac_bits, SaturationCounter* sat) {
  check_frac_bits(frac_bits);
  return {saturate16(static_cast<__int128>(value) << frac_bits, sat), frac_bits};
}

double Fixed16::to_double() const { return std::ldexp(static_cast<double>(raw_), -frac_bits_); }

Fixed16 fx_mul(Fixed16 a, Fixed16 b, SaturationCounter* sat) {
  require_same_format(a, b);
  const __int128 product = static_cast<__int128>(a.raw()) * b.raw();
  return {saturate16(round_shift_even(product, a.frac_bits()), sat), a.frac_bits()};
}

Fixed16 fx_add(Fixed16 a, Fixed16 b, SaturationCounter* sat) {
  require_same_format(a, b);
  return {saturate16(static_cast<__int128>(a.raw()) + b.raw(), sat), a.frac_bits()};
}

Fixed16 fx_sub(Fixed16 a, Fixed16 b, SaturationCounter* sat) {
  require_same_format(a, b);
  return {saturate16(static_cast<__int128>(a.raw()) - b.raw(), sat), a.frac_bits()};
}

double FixedProduct::to_double() const { return std::ldexp(static_cast<double>(raw), -frac_bits); }

Fixed16 FixedProduct::rounded(int target_frac_bits, SaturationCounter* sat) const {
  check_frac_bits(target_frac_bits);
  return {saturate16(round_shift_even(raw, frac_bits - target_frac_bits), sat), target_frac_bits};
}

FixedProduct fx_product(Fixed16 a, Fixed16 b) {
  return {static_cast<std::int64_t>(a.raw()) * b.raw(), a.frac_bits() + b.frac_bits()};
}

FixedProduct fx_product(FixedProduct a, Fixed16 b) {
  // |a.raw| < 2^31 for products of two Fixed16 values; a third factor stays below 2^47.
  if (a.raw > (std::int64_t{1} << 47) || a.raw < -(std::int64_t{1} << 47)) {
    throw OverflowError("fused coefficient exceeds the 64-bit product range");
  }
  return {a.raw * b.raw(), a.frac_bits + b.frac_bits()};
}

}  // namespace beta
