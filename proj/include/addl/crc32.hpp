#ifndef ADDL_CRC32_HPP_
#define ADDL_CRC32_HPP_

#include <cstddef>
#include <cstdint>

namespace addl {

// CRC-32 (IEEE, reflected, poly 0xEDB88320), as used by zlib/PNG.
std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0);

// FNV-1a 64-bit; used as the model digest in stream headers.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len);

}  // namespace addl

#endif  // ADDL_CRC32_HPP_
