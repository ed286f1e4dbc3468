#ifndef ADDL_CONTAINER_HPP_
#define ADDL_CONTAINER_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace addl {

// Coding modes; the degraded variants drop one mechanism each so its
// contribution can be measured.
enum class CodingMode : std::uint8_t {
  kFull = 0,
  kNoSideInfo = 1,         // decoder relies on predicted parameters only
  kNoPredictiveCoding = 2,  // parameters quantized without prediction
  kNoGsac = 3,             // upsampler runs with unit modulation
};

CodingMode parse_mode(const std::string& name);
std::string mode_name(CodingMode mode);

// On-disk dual-layer container (see FORMAT.md).  All integers little-endian;
// the trailing CRC-32 covers every preceding byte.
struct AddlStream {
  std::uint8_t version = 1;
  std::uint32_t width = 0;   // original image dims (pre any padding)
  std::uint32_t height = 0;
  std::uint8_t base_codec_id = 0;  // 0 = internal DCT codec
  CodingMode mode = CodingMode::kFull;
  std::uint64_t model_id = 0;  // digest of the weight checkpoint
  std::vector<std::uint8_t> base_payload;
  std::vector<std::uint8_t> side_payload;  // empty in kNoSideInfo mode

  bool operator==(const AddlStream&) const = default;
};

std::vector<std::uint8_t> serialize_stream(const AddlStream& s);
AddlStream parse_stream(const std::vector<std::uint8_t>& bytes);

void write_stream(const std::string& path, const AddlStream& s);
AddlStream read_stream(const std::string& path);

// Fixed container overhead in bytes (everything except the two payloads).
std::size_t container_header_bytes();

}  // namespace addl

#endif  // ADDL_CONTAINER_HPP_
