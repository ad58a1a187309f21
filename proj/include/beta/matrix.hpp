#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beta/exact.hpp"
#include "beta/fixed16.hpp"

namespace beta {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealTensor = Eigen::MatrixXd;

bool is_supported_bit_width(int bits);

/// Unsigned b-bit integer payload, b in {1, 2, 4, 8}. Immutable once built.
class IntMatrix {
 public:
  IntMatrix() = default;
  // Zero matrix.
  IntMatrix(Index rows, Index cols, int bit_width);
  // Throws EncodingError if any element is >= 2^bit_width.
  IntMatrix(Matrix<std::uint8_t> data, int bit_width);

  template <typename Derived>
  static IntMatrix from(const Eigen::MatrixBase<Derived>& values, int bit_width) {
    check_range(values.template cast<std::int64_t>(), bit_width);
    return IntMatrix(values.template cast<std::uint8_t>(), bit_width);
  }

  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }
  int bit_width() const { return bit_width_; }
  std::uint8_t operator()(Index i, Index j) const { return data_(i, j); }
  const Matrix<std::uint8_t>& data() const { return data_; }
  std::span<const std::uint8_t> row(Index i) const {
    return {data_.data() + i * data_.cols(), static_cast<std::size_t>(data_.cols())};
  }
  IntMatrix transposed() const;

  friend bool operator==(const IntMatrix& a, const IntMatrix& b) {
    return a.bit_width_ == b.bit_width_ && a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() &&
           a.data_ == b.data_;
  }

 private:
  static void check_range(const Matrix<std::int64_t>& values, int bit_width);

  Matrix<std::uint8_t> data_;
  int bit_width_ = 1;
};

/// Bit-packed row-major 0/1 matrix. Padding bits past `cols` in each row are zero.
class BinaryMatrix {
 public:
  static constexpr int kWordBits = 64;

  BinaryMatrix() = default;
  BinaryMatrix(Index rows, Index cols);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index words_per_row() const { return words_per_row_; }
  bool get(Index i, Index j) const {
    return (words_[static_cast<std::size_t>(i * words_per_row_ + j / kWordBits)] >> (j % kWordBits)) & 1U;
  }
  void set(Index i, Index j, bool value);
  std::span<const std::uint64_t> row_words(Index i) const {
    return {words_.data() + i * words_per_row_, static_cast<std::size_t>(words_per_row_)};
  }
  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

// Throws EncodingError on any element outside {0, 1}.
BinaryMatrix pack(const Matrix<std::uint8_t>& bits);
Matrix<std::uint8_t> unpack(const BinaryMatrix& packed);
BinaryMatrix to_binary(const IntMatrix& payload);
IntMatrix to_int(const BinaryMatrix& packed);

enum class Role { activation, weight };

/// Quantized tensor whose element (i, j) decodes to scale * payload(i, j) + offset.
struct AffineOperand {
  IntMatrix payload;
  Fixed16 scale;
  std::optional<Fixed16> offset;
  Role role = Role::activation;

  Index rows() const { return payload.rows(); }
  Index cols() const { return payload.cols(); }
  int bits() const { return payload.bit_width(); }
  int frac_bits() const { return scale.frac_bits(); }
  // Offset or exact zero in the operand's format.
  Fixed16 offset_or_zero() const { return offset.value_or(Fixed16::zero(scale.frac_bits())); }
  // Same payload laid out as (cols x rows); scale, offset and role are kept.
  AffineOperand transposed() const;
};

// Exact decoded value; throws DimensionError when (i, j) is out of bounds.
ExactScalar decode(const AffineOperand& op, Index i, Index j);
// Decoded values as doubles (exact: every decoded value is a short dyadic).
RealTensor dequantize(const AffineOperand& op);

// Exact integer sums. Throws OverflowError beyond the 32-bit sum width.
Vector<std::int32_t> row_sums(const IntMatrix& m);
Vector<std::int32_t> col_sums(const IntMatrix& m);

/// Matrix of FIX-16 values sharing one fraction-bit count.
struct FixedMatrix {
  Matrix<std::int16_t> raw;
  int frac_bits = kDefaultFracBits;

  Index rows() const { return raw.rows(); }
  Index cols() const { return raw.cols(); }
  Fixed16 at(Index i, Index j) const { return {raw(i, j), frac_bits}; }
  RealTensor to_real() const;

  friend bool operator==(const FixedMatrix& a, const FixedMatrix& b) {
    return a.frac_bits == b.frac_bits && a.raw.rows() == b.raw.rows() && a.raw.cols() == b.raw.cols() &&
           a.raw == b.raw;
  }
};

// Text matrix format: header `rows cols bit_width`, then row-major unsigned integers.
IntMatrix parse_matrix(std::istream& in);
void format_matrix(std::ostream& out, const IntMatrix& m);
IntMatrix read_matrix_file(const std::string& path);
void write_matrix_file(const std::string& path, const IntMatrix& m);

}  // namespace beta
