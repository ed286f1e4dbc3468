#include "addl/container.hpp"

#include <cstring>
#include <fstream>

#include "addl/common.hpp"
#include "addl/crc32.hpp"

namespace addl {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::vector<std::uint8_t>& b;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > b.size()) {
      throw FormatError(std::string("container truncated in ") + what,
                        static_cast<std::int64_t>(pos));
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return b[pos++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

}  // namespace

CodingMode parse_mode(const std::string& name) {
  if (name == "full" || name.empty()) return CodingMode::kFull;
  if (name == "no-side") return CodingMode::kNoSideInfo;
  if (name == "no-pred") return CodingMode::kNoPredictiveCoding;
  if (name == "no-gsac") return CodingMode::kNoGsac;
  throw ValueError("unknown mode '" + name + "' (expected full|no-side|no-pred|no-gsac)");
}

std::string mode_name(CodingMode mode) {
  switch (mode) {
    case CodingMode::kFull: return "full";
    case CodingMode::kNoSideInfo: return "no-side";
    case CodingMode::kNoPredictiveCoding: return "no-pred";
    case CodingMode::kNoGsac: return "no-gsac";
  }
  return "invalid";
}

std::size_t container_header_bytes() {
  // magic + version + dims + codec id + mode + model id + 2 length prefixes + crc
  return 4 + 1 + 8 + 1 + 1 + 8 + 4 + 4 + 4;
}

std::vector<std::uint8_t> serialize_stream(const AddlStream& s) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'A', 'D', 'D', 'L'});
  out.push_back(s.version);
  put_u32(out, s.width);
  put_u32(out, s.height);
  out.push_back(s.base_codec_id);
  out.push_back(static_cast<std::uint8_t>(s.mode));
  put_u64(out, s.model_id);
  put_u32(out, static_cast<std::uint32_t>(s.base_payload.size()));
  out.insert(out.end(), s.base_payload.begin(), s.base_payload.end());
  put_u32(out, static_cast<std::uint32_t>(s.side_payload.size()));
  out.insert(out.end(), s.side_payload.begin(), s.side_payload.end());
  put_u32(out, crc32(out.data(), out.size()));
  return out;
}

AddlStream parse_stream(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < container_header_bytes()) {
    throw FormatError("container too short", static_cast<std::int64_t>(bytes.size()));
  }
  if (std::memcmp(bytes.data(), "ADDL", 4) != 0) throw FormatError("bad container magic", 0);
  {
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
    if (crc32(bytes.data(), body) != stored) {
      throw FormatError("container CRC mismatch", static_cast<std::int64_t>(body));
    }
  }
  Reader r{bytes, 4};
  AddlStream s;
  s.version = r.u8("version");
  if (s.version != 1) throw FormatError("unsupported container version", 4);
  s.width = r.u32("width");
  s.height = r.u32("height");
  if (s.width == 0 || s.height == 0 || s.width > (1u << 16) || s.height > (1u << 16)) {
    throw FormatError("container: bad dimensions", 5);
  }
  s.base_codec_id = r.u8("codec id");
  const std::uint8_t mode = r.u8("mode");
  if (mode > 3) throw FormatError("container: unknown coding mode", static_cast<std::int64_t>(r.pos - 1));
  s.mode = static_cast<CodingMode>(mode);
  s.model_id = r.u64("model id");
  const std::uint32_t base_len = r.u32("base length");
  r.need(base_len, "base payload");
  s.base_payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos),
                        bytes.begin() + static_cast<std::ptrdiff_t>(r.pos + base_len));
  r.pos += base_len;
  const std::uint32_t side_len = r.u32("side length");
  r.need(side_len, "side payload");
  s.side_payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos),
                        bytes.begin() + static_cast<std::ptrdiff_t>(r.pos + side_len));
  r.pos += side_len;
  if (r.pos + 4 != bytes.size()) {
    throw FormatError("container has trailing bytes", static_cast<std::int64_t>(r.pos));
  }
  return s;
}

void write_stream(const std::string& path, const AddlStream& s) {
  const std::vector<std::uint8_t> bytes = serialize_stream(s);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValueError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ValueError("failed writing " + path);
}

AddlStream read_stream(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_stream(bytes);
}

}  // namespace addl
