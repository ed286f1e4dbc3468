#include "addl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "addl/common.hpp"
#include "addl/crc32.hpp"

namespace addl {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::vector<std::uint8_t>& b;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos + 1 > b.size()) throw FormatError("checkpoint truncated", static_cast<std::int64_t>(pos));
    return b[pos++];
  }
  std::uint16_t u16() {
    if (pos + 2 > b.size()) throw FormatError("checkpoint truncated", static_cast<std::int64_t>(pos));
    std::uint16_t v = static_cast<std::uint16_t>(b[pos] | (b[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    if (pos + 4 > b.size()) throw FormatError("checkpoint truncated", static_cast<std::int64_t>(pos));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    if (pos + 8 > b.size()) throw FormatError("checkpoint truncated", static_cast<std::int64_t>(pos));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
};

constexpr std::uint8_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const std::vector<NamedParam>& params) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'A', 'D', 'W', 'T'});
  out.push_back(kVersion);
  for (const NamedParam& p : params) {
    if (p.name.size() > 0xFFFF) throw ValueError("checkpoint: parameter name too long");
    put_u16(out, static_cast<std::uint16_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    const Shape& s = p.tensor.shape();
    if (s.size() > 255) throw ValueError("checkpoint: rank too large");
    out.push_back(static_cast<std::uint8_t>(s.size()));
    for (int e : s) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : p.tensor.data()) put_f64(out, v);
  }
  put_u32(out, crc32(out.data(), out.size()));
  return out;
}

std::vector<NamedParam> parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 9) throw FormatError("checkpoint too short", 0);
  if (std::memcmp(bytes.data(), "ADWT", 4) != 0) throw FormatError("bad checkpoint magic", 0);
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  if (crc32(bytes.data(), body) != stored) {
    throw FormatError("checkpoint CRC mismatch", static_cast<std::int64_t>(body));
  }
  Reader r{bytes};
  r.pos = 4;
  if (r.u8() != kVersion) throw FormatError("unsupported checkpoint version", 4);
  std::vector<NamedParam> params;
  while (r.pos < body) {
    NamedParam p;
    const std::uint16_t nlen = r.u16();
    if (r.pos + nlen > body) throw FormatError("checkpoint truncated name", static_cast<std::int64_t>(r.pos));
    p.name.assign(reinterpret_cast<const char*>(bytes.data() + r.pos), nlen);
    r.pos += nlen;
    const int rank = r.u8();
    Shape shape(rank);
    std::size_t numel = 1;
    for (int i = 0; i < rank; ++i) {
      shape[i] = static_cast<int>(r.u32());
      numel *= static_cast<std::size_t>(shape[i]);
    }
    if (r.pos + numel * 8 > body || numel > (1u << 28)) {
      throw FormatError("checkpoint record overruns payload", static_cast<std::int64_t>(r.pos));
    }
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) data[i] = r.f64();
    p.tensor = Tensor::from_data(shape, std::move(data));
    params.push_back(std::move(p));
  }
  return params;
}

void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(params);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValueError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ValueError("failed writing " + path);
}

std::vector<NamedParam> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValueError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

std::uint64_t checkpoint_digest(const std::vector<NamedParam>& params) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(params);
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace addl
