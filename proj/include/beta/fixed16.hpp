#pragma once

#include <cstdint>
#include <limits>

namespace beta {

inline constexpr int kDefaultFracBits = 8;
inline constexpr std::int32_t kFixed16Max = std::numeric_limits<std::int16_t>::max();
inline constexpr std::int32_t kFixed16Min = std::numeric_limits<std::int16_t>::min();

// Counts saturation events. One counter per execution context; not shared.
struct SaturationCounter {
  std::uint64_t events = 0;
};

// Divides `value` by 2^shift, rounding to nearest with ties to even.
__int128 round_shift_even(__int128 value, int shift);

// Clamps to the int16 range, counting a saturation event when clamping occurs.
std::int16_t saturate16(__int128 value, SaturationCounter* sat = nullptr);

/// 16-bit two's-complement fixed-point number with `frac_bits` fraction bits.
///
/// The represented value is raw * 2^-frac_bits. All arithmetic rounds to
/// nearest-even and saturates on the raw field.
class Fixed16 {
 public:
  constexpr Fixed16() = default;
  constexpr Fixed16(std::int16_t raw, int frac_bits) : raw_(raw), frac_bits_(static_cast<std::int8_t>(frac_bits)) {}

  static Fixed16 from_double(double value, int frac_bits, SaturationCounter* sat = nullptr);
  static Fixed16 from_int(std::int64_t value, int frac_bits, SaturationCounter* sat = nullptr);
  static constexpr Fixed16 smallest_positive(int frac_bits) { return {1, frac_bits}; }
  static constexpr Fixed16 zero(int frac_bits) { return {0, frac_bits}; }

  constexpr std::int16_t raw() const { return raw_; }
  constexpr int frac_bits() const { return frac_bits_; }
  double to_double() const;
  constexpr bool is_zero() const { return raw_ == 0; }

  friend constexpr bool operator==(Fixed16, Fixed16) = default;

 private:
  std::int16_t raw_ = 0;
  std::int8_t frac_bits_ = kDefaultFracBits;
};

// Throws EncodingError when frac_bits lies outside [0, 15].
void check_frac_bits(int frac_bits);

Fixed16 fx_mul(Fixed16 a, Fixed16 b, SaturationCounter* sat = nullptr);
Fixed16 fx_add(Fixed16 a, Fixed16 b, SaturationCounter* sat = nullptr);
Fixed16 fx_sub(Fixed16 a, Fixed16 b, SaturationCounter* sat = nullptr);

/// Exact product of FIX-16 factors, kept at full width (raw * 2^-frac_bits).
///
/// A product of two Fixed16 values with F fraction bits has 2F fraction bits
/// and fits 31 bits; a third factor still fits 46 bits.
struct FixedProduct {
  std::int64_t raw = 0;
  int frac_bits = 0;

  bool is_zero() const { return raw == 0; }
  double to_double() const;
  // Rounds to a Fixed16 with `target_frac_bits` fraction bits.
  Fixed16 rounded(int target_frac_bits, SaturationCounter* sat = nullptr) const;

  friend bool operator==(const FixedProduct&, const FixedProduct&) = default;
};

FixedProduct fx_product(Fixed16 a, Fixed16 b);
FixedProduct fx_product(FixedProduct a, Fixed16 b);

}  // namespace beta
