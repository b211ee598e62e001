#include "engrave/archive.h"

#include <cstdint>
#include <regex>
#include <vector>

#include <zlib.h>

#include "engrave/error.h"

namespace engrave {
namespace {

[[noreturn]] void bad(const std::string& msg) {
  throw Error(ErrorCode::kMalformedXml, "archive: " + msg);
}

std::uint32_t le(std::string_view b, std::size_t at, int width) {
  if (at + width > b.size()) bad("truncated zip structure");
  std::uint32_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  }
  return v;
}

// windowBits: 16 + MAX_WBITS for gzip, -MAX_WBITS for raw deflate.
std::string inflate_bytes(std::string_view in, int window_bits) {
  z_stream zs{};
  if (inflateInit2(&zs, window_bits) != Z_OK) bad("inflateInit failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  std::string out;
  char buf[1 << 15];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      bad("corrupt compressed stream");
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      bad("truncated compressed stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

struct ZipEntry {
  std::string name;
  std::uint32_t method = 0;
  std::uint32_t compressed = 0;
  std::uint32_t local_offset = 0;
};

std::vector<ZipEntry> zip_directory(std::string_view b) {
  if (b.size() < 22) bad("zip too short");
  std::size_t eocd = std::string_view::npos;
  for (std::size_t i = b.size() - 22 + 1; i-- > 0;) {
    if (le(b, i, 4) == 0x06054b50) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string_view::npos) bad("zip end record not found");
  const std::uint32_t count = le(b, eocd + 10, 2);
  std::size_t at = le(b, eocd + 16, 4);
  std::vector<ZipEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (le(b, at, 4) != 0x02014b50) bad("bad central directory entry");
    ZipEntry e;
    e.method = le(b, at + 10, 2);
    e.compressed = le(b, at + 20, 4);
    const std::uint32_t name_len = le(b, at + 28, 2);
    const std::uint32_t extra_len = le(b, at + 30, 2);
    const std::uint32_t comment_len = le(b, at + 32, 2);
    e.local_offset = le(b, at + 42, 4);
    if (at + 46 + name_len > b.size()) bad("truncated entry name");
    e.name = std::string(b.substr(at + 46, name_len));
    entries.push_back(std::move(e));
    at += 46 + name_len + extra_len + comment_len;
  }
  return entries;
}

std::string zip_extract(std::string_view b, const ZipEntry& e) {
  const std::size_t h = e.local_offset;
  if (le(b, h, 4) != 0x04034b50) bad("bad local header for " + e.name);
  const std::size_t data = h + 30 + le(b, h + 26, 2) + le(b, h + 28, 2);
  if (data + e.compressed > b.size()) bad("truncated data for " + e.name);
  const std::string_view raw = b.substr(data, e.compressed);
  if (e.method == 0) return std::string(raw);
  if (e.method == 8) return inflate_bytes(raw, -MAX_WBITS);
  bad("unsupported compression method for " + e.name);
}

}  // namespace

bool is_gzip(std::string_view bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

bool is_zip(std::string_view bytes) { return bytes.substr(0, 4) == std::string_view("PK\x03\x04", 4); }

std::string gunzip(std::string_view bytes) { return inflate_bytes(bytes, 16 + MAX_WBITS); }

std::string read_mxl(std::string_view bytes) {
  const auto entries = zip_directory(bytes);
  for (const auto& e : entries) {
    if (e.name != "META-INF/container.xml") continue;
    const std::string container = zip_extract(bytes, e);
    std::smatch m;
    static const std::regex kRoot("full-path\\s*=\\s*\"([^\"]+)\"");
    if (std::regex_search(container, m, kRoot)) {
      for (const auto& target : entries) {
        if (target.name == m[1].str()) return zip_extract(bytes, target);
      }
      bad("rootfile " + m[1].str() + " missing from container");
    }
  }
  for (const auto& e : entries) {
    if (e.name.rfind("META-INF/", 0) == 0) continue;
    if (e.name.ends_with(".xml") || e.name.ends_with(".musicxml")) return zip_extract(bytes, e);
  }
  bad("no score inside container");
}

std::string decompress_score_bytes(std::string_view bytes) {
  if (is_gzip(bytes)) return gunzip(bytes);
  if (is_zip(bytes)) return read_mxl(bytes);
  return std::string(bytes);
}

}  // namespace engrave
