#ifndef ADDL_CHECKPOINT_HPP_
#define ADDL_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "addl/tensor.hpp"

namespace addl {

// Weight checkpoint: magic "ADWT", version byte, then for every parameter
//   name length (u16 LE) + UTF-8 name + rank (u8) + extents (u32 LE each)
//   + raw little-endian f64 data,
// closed by a CRC-32 (u32 LE) over everything before it.  Load and save are
// bit-exact inverses.
struct NamedParam {
  std::string name;
  Tensor tensor;
};

std::vector<std::uint8_t> serialize_checkpoint(const std::vector<NamedParam>& params);
std::vector<NamedParam> parse_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params);
std::vector<NamedParam> load_checkpoint(const std::string& path);

// 8-byte digest of the serialized checkpoint; identifies a weight set.
std::uint64_t checkpoint_digest(const std::vector<NamedParam>& params);

}  // namespace addl

#endif  // ADDL_CHECKPOINT_HPP_
