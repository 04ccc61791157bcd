#include "iconik/io.hpp"
#include "iconik/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace iconik {

namespace {

void put32(std::vector<std::uint8_t> &out, std::uint32_t v)
{
  for (int s = 24; s >= 0; s -= 8) { out.push_back(static_cast<std::uint8_t>(v >> s)); }
}

std::uint32_t get32(std::uint8_t const *p) { return (std::uint32_t(p[0]) << 24) | (p[1] << 16) | (p[2] << 8) | p[3]; }

void chunk(std::vector<std::uint8_t> &out, char const *type, std::vector<std::uint8_t> const &data)
{
  put32(out, static_cast<std::uint32_t>(data.size()));
  std::size_t const start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + start, static_cast<uInt>(out.size() - start));
  put32(out, static_cast<std::uint32_t>(crc));
}

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

} // namespace

double percentile(RealImage const &img, double q)
{
  if (img.empty()) { throw DataError("percentile: empty image"); }
  std::vector<double> v(img.begin(), img.end());
  std::sort(v.begin(), v.end());
  double const pos = std::clamp(q, 0.0, 1.0) * (v.size() - 1);
  std::size_t const lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t const hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

std::vector<std::uint8_t> encode_png16(RealImage const &img, double window_max)
{
  std::size_t const H = img.rows(), W = img.cols();
  if (H == 0 || W == 0) { throw DataError("png: empty image"); }
  double const scale = window_max > 0.0 ? 65535.0 / window_max : 0.0;
  std::vector<std::uint8_t> raw;
  raw.reserve(H * (1 + 2 * W));
  for (std::size_t y = 0; y < H; ++y) {
    raw.push_back(0);
    for (std::size_t x = 0; x < W; ++x) {
      double const v = std::clamp(img(y, x) * scale, 0.0, 65535.0);
      auto const s = static_cast<std::uint16_t>(std::lround(std::isfinite(v) ? v : 0.0));
      raw.push_back(static_cast<std::uint8_t>(s >> 8));
      raw.push_back(static_cast<std::uint8_t>(s & 0xff));
    }
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(len);
  if (compress2(z.data(), &len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw IoError("png: zlib compression failed");
  }
  z.resize(len);

  std::vector<std::uint8_t> out(kSignature, kSignature + 8);
  std::vector<std::uint8_t> ihdr;
  put32(ihdr, static_cast<std::uint32_t>(W));
  put32(ihdr, static_cast<std::uint32_t>(H));
  ihdr.insert(ihdr.end(), {16, 0, 0, 0, 0}); // depth 16, grayscale, deflate, no filter, no interlace
  chunk(out, "IHDR", ihdr);
  chunk(out, "IDAT", z);
  chunk(out, "IEND", {});
  return out;
}

void write_png16(fs::path const &path, RealImage const &img, double window_max)
{
  auto const bytes = encode_png16(img, window_max);
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw IoError("cannot open for writing: " + path.string()); }
  os.write(reinterpret_cast<char const *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) { throw IoError("write failed: " + path.string()); }
}

Array2<std::uint16_t> decode_png16(std::vector<std::uint8_t> const &bytes)
{
  if (bytes.size() < 8 || !std::equal(kSignature, kSignature + 8, bytes.begin())) {
    throw FormatError("png: bad signature");
  }
  std::size_t pos = 8;
  std::uint32_t W = 0, H = 0;
  int depth = 0;
  std::vector<std::uint8_t> z;
  bool end = false;
  while (!end) {
    if (pos + 12 > bytes.size()) { throw FormatError("png: truncated chunk"); }
    std::uint32_t const len = get32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) { throw FormatError("png: truncated chunk"); }
    std::string const type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
    std::uint8_t const *data = &bytes[pos + 8];
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, &bytes[pos + 4], len + 4);
    if (crc != get32(data + len)) { throw FormatError("png: CRC mismatch in " + type); }
    if (type == "IHDR") {
      if (len != 13) { throw FormatError("png: bad IHDR"); }
      W = get32(data);
      H = get32(data + 4);
      depth = data[8];
      if (data[9] != 0 || (depth != 8 && depth != 16) || data[12] != 0) {
        throw FormatError("png: only non-interlaced grayscale is supported");
      }
    } else if (type == "IDAT") {
      z.insert(z.end(), data, data + len);
    } else if (type == "IEND") {
      end = true;
    }
    pos += 12 + len;
  }
  if (W == 0 || H == 0 || static_cast<std::uint64_t>(W) * H > (1u << 28)) { throw FormatError("png: bad dimensions"); }
  std::size_t const bpp = depth / 8, stride = 1 + W * bpp;
  std::vector<std::uint8_t> raw(stride * H);
  uLongf rlen = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &rlen, z.data(), static_cast<uLong>(z.size())) != Z_OK || rlen != raw.size()) {
    throw FormatError("png: corrupt image data");
  }
  Array2<std::uint16_t> img(H, W);
  for (std::size_t y = 0; y < H; ++y) {
    if (raw[y * stride] != 0) { throw FormatError("png: unsupported row filter"); }
    for (std::size_t x = 0; x < W; ++x) {
      std::uint8_t const *p = &raw[y * stride + 1 + x * bpp];
      img(y, x) = bpp == 2 ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : p[0];
    }
  }
  return img;
}

} // namespace iconik
