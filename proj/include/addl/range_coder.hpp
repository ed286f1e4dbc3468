#ifndef ADDL_RANGE_CODER_HPP_
#define ADDL_RANGE_CODER_HPP_

#include <cstdint>
#include <vector>

#include "addl/common.hpp"

namespace addl {

// Adaptive binary probability, 11-bit precision, shift-5 update.
struct BitModel {
  std::uint16_t prob = 1024;  // P(bit == 0) in units of 1/2048

  explicit BitModel(std::uint16_t init = 1024) : prob(init) {}
};

// Carry-propagating binary range encoder (LZMA style): 32-bit range, 64-bit
// low with byte cache.  Bit-exact and platform independent.
class RangeEncoder {
 public:
  void encode_bit(BitModel& m, int bit);
  void encode_bypass(std::uint32_t value, int nbits);
  // Unsigned Exp-Golomb order 0 in bypass bits.
  void encode_eg0(std::uint32_t value);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  // Reads over [data, data+len); throws FormatError when the stream is
  // exhausted prematurely.
  RangeDecoder(const std::uint8_t* data, std::size_t len);

  int decode_bit(BitModel& m);
  std::uint32_t decode_bypass(int nbits);
  std::uint32_t decode_eg0();
  std::size_t consumed() const { return pos_; }

 private:
  std::uint8_t next_byte();
  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

// Context set for coding signed integers: a zero flag, a sign bit, and an
// adaptive unary magnitude prefix with an EG0 bypass tail.
struct SignedIntModel {
  static constexpr int kUnaryCtxs = 12;
  BitModel zero{1792};  // zeros dominate in residue/AC data
  BitModel sign{1024};
  BitModel unary[kUnaryCtxs];

  SignedIntModel() {
    for (auto& m : unary) m = BitModel(1024);
  }
};

void encode_signed(RangeEncoder& enc, SignedIntModel& m, std::int32_t v);
std::int32_t decode_signed(RangeDecoder& dec, SignedIntModel& m);

}  // namespace addl

#endif  // ADDL_RANGE_CODER_HPP_
