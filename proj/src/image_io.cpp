#include "segattack/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace segattack {

namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return bytes;
}

void write_all(const std::filesystem::path& path, const std::string& header,
               const void* body, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write file: " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(body), static_cast<std::streamsize>(n));
  require(out.good(), "short write: " + path.string());
}

// Parses "P6\n<w> <h>\n<maxval>\n" tolerating any whitespace and # comments.
struct PnmHeader {
  int w = 0, h = 0, maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(const std::vector<char>& bytes, const char* magic,
                           const std::filesystem::path& path) {
  require(bytes.size() > 2 && bytes[0] == magic[0] && bytes[1] == magic[1],
          "not a " + std::string(magic) + " file: " + path.string());
  PnmHeader hd;
  std::size_t pos = 2;
  int fields[3];
  for (int f = 0; f < 3; ++f) {
    while (pos < bytes.size()) {
      char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos;
      } else {
        break;
      }
    }
    int value = 0;
    bool any = false;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    require(any, "malformed header: " + path.string());
    fields[f] = value;
  }
  require(pos < bytes.size(), "truncated header: " + path.string());
  ++pos;  // single whitespace byte after maxval
  hd.w = fields[0];
  hd.h = fields[1];
  hd.maxval = fields[2];
  hd.data_offset = pos;
  return hd;
}

inline std::uint8_t quantize8(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  require(image.rank() == 3 && image.dim(2) == 3,
          "write_ppm expects an H x W x 3 tensor");
  const int h = static_cast<int>(image.dim(0));
  const int w = static_cast<int>(image.dim(1));
  std::vector<std::uint8_t> body(static_cast<std::size_t>(h) * w * 3);
  for (std::size_t i = 0; i < body.size(); ++i) body[i] = quantize8(image[i]);
  std::ostringstream hd;
  hd << "P6\n" << w << " " << h << "\n255\n";
  write_all(path, hd.str(), body.data(), body.size());
}

Tensor read_ppm(const std::filesystem::path& path) {
  auto bytes = read_all(path);
  auto hd = parse_pnm_header(bytes, "P6", path);
  require(hd.maxval == 255, "unsupported maxval in " + path.string());
  std::size_t n = static_cast<std::size_t>(hd.w) * hd.h * 3;
  require(bytes.size() >= hd.data_offset + n, "truncated pixel data: " + path.string());
  Tensor t({static_cast<std::size_t>(hd.h), static_cast<std::size_t>(hd.w), 3});
  for (std::size_t i = 0; i < n; ++i)
    t[i] = static_cast<std::uint8_t>(bytes[hd.data_offset + i]) / 255.0;
  return t;
}

void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& g) {
  std::ostringstream hd;
  hd << "P5\n" << g.w << " " << g.h << "\n255\n";
  write_all(path, hd.str(), g.v.data(), g.v.size());
}

Grid<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  auto bytes = read_all(path);
  auto hd = parse_pnm_header(bytes, "P5", path);
  require(hd.maxval == 255, "unsupported maxval in " + path.string());
  std::size_t n = static_cast<std::size_t>(hd.w) * hd.h;
  require(bytes.size() >= hd.data_offset + n, "truncated pixel data: " + path.string());
  Grid<std::uint8_t> g(hd.h, hd.w);
  for (std::size_t i = 0; i < n; ++i)
    g.v[i] = static_cast<std::uint8_t>(bytes[hd.data_offset + i]);
  return g;
}

void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& g) {
  std::ostringstream hd;
  hd << "P5\n" << g.w << " " << g.h << "\n65535\n";
  std::vector<std::uint8_t> body(g.v.size() * 2);
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    body[2 * i] = static_cast<std::uint8_t>(g.v[i] >> 8);
    body[2 * i + 1] = static_cast<std::uint8_t>(g.v[i] & 0xFF);
  }
  write_all(path, hd.str(), body.data(), body.size());
}

void write_mask(const std::filesystem::path& path, const BinaryMask& m) {
  Grid<std::uint8_t> g(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) g.v[i] = m.v[i] ? 255 : 0;
  write_pgm(path, g);
}

BinaryMask read_mask(const std::filesystem::path& path) {
  auto g = read_pgm(path);
  BinaryMask m(g.h, g.w);
  for (std::size_t i = 0; i < g.v.size(); ++i) m.v[i] = g.v[i] >= 128 ? 1 : 0;
  return m;
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    hash ^= p[i];
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  auto bytes = read_all(path);
  return fnv1a64(bytes.data(), bytes.size());
}

std::string read_text_file(const std::filesystem::path& path) {
  auto bytes = read_all(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, const std::string& s) {
  write_all(path, "", s.data(), s.size());
}

}  // namespace segattack
