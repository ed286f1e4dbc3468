#include "addl/range_coder.hpp"

namespace addl {

namespace {
constexpr std::uint32_t kTopValue = 1u << 24;
constexpr int kProbBits = 11;
constexpr int kMoveBits = 5;
}  // namespace

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_ >> 32) != 0 ||
      static_cast<std::uint32_t>(low_) < 0xFF000000u) {
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    do {
      out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
      cache_ = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0xFFFFFFFFull) << 8;
}

void RangeEncoder::encode_bit(BitModel& m, int bit) {
  const std::uint32_t bound = (range_ >> kProbBits) * m.prob;
  if (bit == 0) {
    range_ = bound;
    m.prob += (static_cast<std::uint16_t>(1 << kProbBits) - m.prob) >> kMoveBits;
  } else {
    low_ += bound;
    range_ -= bound;
    m.prob -= m.prob >> kMoveBits;
  }
  while (range_ < kTopValue) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_bypass(std::uint32_t value, int nbits) {
  for (int i = nbits - 1; i >= 0; --i) {
    range_ >>= 1;
    if ((value >> i) & 1u) low_ += range_;
    while (range_ < kTopValue) {
      range_ <<= 8;
      shift_low();
    }
  }
}

void RangeEncoder::encode_eg0(std::uint32_t value) {
  // prefix: n one-bits then a zero, where n = floor(log2(value + 1))
  const std::uint64_t v1 = static_cast<std::uint64_t>(value) + 1;
  int n = 0;
  while ((v1 >> (n + 1)) != 0) ++n;
  for (int i = 0; i < n; ++i) encode_bypass(1, 1);
  encode_bypass(0, 1);
  if (n > 0) encode_bypass(static_cast<std::uint32_t>(v1 & ((1ull << n) - 1)), n);
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (!finished_) {
    for (int i = 0; i < 5; ++i) shift_low();
    finished_ = true;
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {
  next_byte();  // leading zero from the encoder cache
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= len_) {
    throw FormatError("entropy stream exhausted", static_cast<std::int64_t>(pos_));
  }
  return data_[pos_++];
}

int RangeDecoder::decode_bit(BitModel& m) {
  const std::uint32_t bound = (range_ >> kProbBits) * m.prob;
  int bit;
  if (code_ < bound) {
    range_ = bound;
    m.prob += (static_cast<std::uint16_t>(1 << kProbBits) - m.prob) >> kMoveBits;
    bit = 0;
  } else {
    code_ -= bound;
    range_ -= bound;
    m.prob -= m.prob >> kMoveBits;
    bit = 1;
  }
  while (range_ < kTopValue) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  return bit;
}

std::uint32_t RangeDecoder::decode_bypass(int nbits) {
  std::uint32_t v = 0;
  for (int i = 0; i < nbits; ++i) {
    range_ >>= 1;
    int bit = 0;
    if (code_ >= range_) {
      code_ -= range_;
      bit = 1;
    }
    v = (v << 1) | static_cast<std::uint32_t>(bit);
    while (range_ < kTopValue) {
      range_ <<= 8;
      code_ = (code_ << 8) | next_byte();
    }
  }
  return v;
}

std::uint32_t RangeDecoder::decode_eg0() {
  int n = 0;
  while (decode_bypass(1) == 1) {
    if (++n > 32) throw FormatError("malformed EG0 prefix", static_cast<std::int64_t>(pos_));
  }
  std::uint64_t v1 = 1ull << n;
  if (n > 0) v1 |= decode_bypass(n);
  return static_cast<std::uint32_t>(v1 - 1);
}

void encode_signed(RangeEncoder& enc, SignedIntModel& m, std::int32_t v) {
  if (v == 0) {
    enc.encode_bit(m.zero, 0);
    return;
  }
  enc.encode_bit(m.zero, 1);
  enc.encode_bit(m.sign, v < 0 ? 1 : 0);
  std::uint32_t mag = static_cast<std::uint32_t>(v < 0 ? -static_cast<std::int64_t>(v)
                                                       : static_cast<std::int64_t>(v)) - 1;
  int j = 0;
  while (j < SignedIntModel::kUnaryCtxs && mag > 0) {
    enc.encode_bit(m.unary[j], 1);
    --mag;
    ++j;
  }
  if (j < SignedIntModel::kUnaryCtxs) {
    enc.encode_bit(m.unary[j], 0);
  } else {
    enc.encode_eg0(mag);
  }
}

std::int32_t decode_signed(RangeDecoder& dec, SignedIntModel& m) {
  if (dec.decode_bit(m.zero) == 0) return 0;
  const int neg = dec.decode_bit(m.sign);
  std::uint32_t mag = 0;
  int j = 0;
  while (j < SignedIntModel::kUnaryCtxs && dec.decode_bit(m.unary[j]) == 1) {
    ++mag;
    ++j;
  }
  if (j == SignedIntModel::kUnaryCtxs) mag += dec.decode_eg0();
  const std::int64_t v = static_cast<std::int64_t>(mag) + 1;
  return static_cast<std::int32_t>(neg ? -v : v);
}

}  // namespace addl
