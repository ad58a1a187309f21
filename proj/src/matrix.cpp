#include "beta/matrix.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "beta/errors.hpp"

namespace beta {

bool is_supported_bit_width(int bits) { return bits == 1 || bits == 2 || bits == 4 || bits == 8; }

namespace {

void require_bit_width(int bits) {
  if (!is_supported_bit_width(bits)) {
    throw EncodingError("unsupported bit width " + std::to_string(bits) + " (expected 1, 2, 4 or 8)");
  }
}

}  // namespace

IntMatrix::IntMatrix(Index rows, Index cols, int bit_width)
    : data_(Matrix<std::uint8_t>::Zero(rows, cols)), bit_width_(bit_width) {
  require_bit_width(bit_width);
}

IntMatrix::IntMatrix(Matrix<std::uint8_t> data, int bit_width) : data_(std::move(data)), bit_width_(bit_width) {
  require_bit_width(bit_width);
  const unsigned limit = 1U << bit_width;
  for (Index i = 0; i < data_.size(); ++i) {
    if (data_.data()[i] >= limit) {
      throw EncodingError("element " + std::to_string(data_.data()[i]) + " does not fit " +
                          std::to_string(bit_width) + " bits");
    }
  }
}

void IntMatrix::check_range(const Matrix<std::int64_t>& values, int bit_width) {
  require_bit_width(bit_width);
  const std::int64_t limit = std::int64_t{1} << bit_width;
  for (Index i = 0; i < values.size(); ++i) {
    const std::int64_t v = values.data()[i];
    if (v < 0 || v >= limit) {
      throw EncodingError("element " + std::to_string(v) + " does not fit " + std::to_string(bit_width) + " bits");
    }
  }
}

IntMatrix IntMatrix::transposed() const {
  Matrix<std::uint8_t> t = data_.transpose();
  return IntMatrix(std::move(t), bit_width_);
}

BinaryMatrix::BinaryMatrix(Index rows, Index cols)
    : rows_(rows),
      cols_(cols),
      words_per_row_((cols + kWordBits - 1) / kWordBits),
      words_(static_cast<std::size_t>(rows * words_per_row_), 0) {}

void BinaryMatrix::set(Index i, Index j, bool value) {
  auto& word = words_[static_cast<std::size_t>(i * words_per_row_ + j / kWordBits)];
  const std::uint64_t mask = std::uint64_t{1} << (j % kWordBits);
  word = value ? (word | mask) : (word & ~mask);
}

BinaryMatrix pack(const Matrix<std::uint8_t>& bits) {
  BinaryMatrix packed(bits.rows(), bits.cols());
  for (Index i = 0; i < bits.rows(); ++i) {
    for (Index j = 0; j < bits.cols(); ++j) {
      const auto v = bits(i, j);
      if (v > 1) throw EncodingError("binary matrix element " + std::to_string(v) + " is not 0 or 1");
      if (v) packed.set(i, j, true);
    }
  }
  return packed;
}

Matrix<std::uint8_t> unpack(const BinaryMatrix& packed) {
  Matrix<std::uint8_t> bits(packed.rows(), packed.cols());
  for (Index i = 0; i < packed.rows(); ++i) {
    for (Index j = 0; j < packed.cols(); ++j) bits(i, j) = packed.get(i, j) ? 1 : 0;
  }
  return bits;
}

BinaryMatrix to_binary(const IntMatrix& payload) {
  if (payload.bit_width() != 1) throw EncodingError("only 1-bit payloads convert to a binary matrix");
  return pack(payload.data());
}

IntMatrix to_int(const BinaryMatrix& packed) { return IntMatrix(unpack(packed), 1); }

AffineOperand AffineOperand::transposed() const { return {payload.transposed(), scale, offset, role}; }

ExactScalar decode(const AffineOperand& op, Index i, Index j) {
  if (i < 0 || j < 0 || i >= op.rows() || j >= op.cols()) {
    throw DimensionError("decode index (" + std::to_string(i) + ", " + std::to_string(j) + ") outside " +
                         std::to_string(op.rows()) + "x" + std::to_string(op.cols()));
  }
  const std::int64_t numerator =
      static_cast<std::int64_t>(op.scale.raw()) * op.payload(i, j) + op.offset_or_zero().raw();
  return ExactScalar(numerator) / ExactScalar(BigInt(1) << op.frac_bits());
}

RealTensor dequantize(const AffineOperand& op) {
  const double scale = op.scale.to_double();
  const double offset = op.offset_or_zero().to_double();
  return (op.payload.data().cast<double>().array() * scale + offset).matrix();
}

namespace {

std::int32_t checked_sum(std::int64_t sum) {
  if (sum > std::numeric_limits<std::int32_t>::max()) {
    throw OverflowError("sum " + std::to_string(sum) + " exceeds the 32-bit sum width");
  }
  return static_cast<std::int32_t>(sum);
}

}  // namespace

Vector<std::int32_t> row_sums(const IntMatrix& m) {
  const Vector<std::int64_t> wide = m.data().cast<std::int64_t>().rowwise().sum();
  return wide.unaryExpr([](std::int64_t s) { return checked_sum(s); });
}

Vector<std::int32_t> col_sums(const IntMatrix& m) {
  const Vector<std::int64_t> wide = m.data().cast<std::int64_t>().colwise().sum().transpose();
  return wide.unaryExpr([](std::int64_t s) { return checked_sum(s); });
}

RealTensor FixedMatrix::to_real() const {
  return raw.cast<double>() * std::ldexp(1.0, -frac_bits);
}

IntMatrix parse_matrix(std::istream& in) {
  long long rows = 0;
  long long cols = 0;
  int bits = 0;
  if (!(in >> rows >> cols >> bits)) throw EncodingError("matrix header must be `rows cols bit_width`");
  if (rows <= 0 || cols <= 0) throw DimensionError("matrix dimensions must be positive");
  require_bit_width(bits);
  Matrix<std::int64_t> values(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      long long v = 0;
      if (!(in >> v)) {
        throw EncodingError("matrix body ended after " + std::to_string(i * cols + j) + " of " +
                            std::to_string(rows * cols) + " elements");
      }
      values(i, j) = v;
    }
  }
  std::string trailing;
  if (in >> trailing) throw EncodingError("unexpected trailing token `" + trailing + "` after matrix body");
  return IntMatrix::from(values, bits);
}

void format_matrix(std::ostream& out, const IntMatrix& m) {
  out << m.rows() << ' ' << m.cols() << ' ' << m.bit_width() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << static_cast<unsigned>(m(i, j));
    }
    out << '\n';
  }
}

IntMatrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open matrix file " + path);
  try {
    return parse_matrix(in);
  } catch (const Error& e) {
    throw EncodingError(path + ": " + e.what());
  }
}

void write_matrix_file(const std::string& path, const IntMatrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write matrix file " + path);
  format_matrix(out, m);
}

}  // namespace beta
