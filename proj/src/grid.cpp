#include "bedsim/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bedsim {

float FloatGrid::max_value() const {
  float m = 0.0f;
  if (!data.empty()) m = *std::max_element(data.begin(), data.end());
  return m;
}

double FloatGrid::sum() const {
  double s = 0.0;
  for (float v : data) s += v;
  return s;
}

bool FloatGrid::bitwise_equal(const FloatGrid& other) const {
  if (rows != other.rows || cols != other.cols || kind != other.kind) return false;
  return std::memcmp(data.data(), other.data.data(), data.size() * sizeof(float)) == 0;
}

namespace {

void put_u32_le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_pfg(const std::string& path, const FloatGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("PFG1", 4);
  put_u32_le(os, static_cast<uint32_t>(grid.rows));
  put_u32_le(os, static_cast<uint32_t>(grid.cols));
  const unsigned char kind = static_cast<unsigned char>(grid.kind);
  os.write(reinterpret_cast<const char*>(&kind), 1);
  static_assert(sizeof(float) == 4);
  // Hosts here are little-endian; write payload directly.
  os.write(reinterpret_cast<const char*>(grid.data.data()),
           static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

FloatGrid read_pfg(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PFG1", 4) != 0)
    throw std::runtime_error("bad float-grid magic in " + path);
  FloatGrid g;
  g.rows = static_cast<int>(get_u32_le(is));
  g.cols = static_cast<int>(get_u32_le(is));
  if (g.rows <= 0 || g.cols <= 0 || static_cast<long long>(g.rows) * g.cols > (1LL << 28))
    throw std::runtime_error("bad float-grid dimensions in " + path);
  unsigned char kind = 0;
  is.read(reinterpret_cast<char*>(&kind), 1);
  if (kind > static_cast<unsigned char>(GridKind::kPenetration))
    throw std::runtime_error("bad float-grid kind in " + path);
  g.kind = static_cast<GridKind>(kind);
  g.data.resize(static_cast<size_t>(g.rows) * g.cols);
  is.read(reinterpret_cast<char*>(g.data.data()),
          static_cast<std::streamsize>(g.data.size() * sizeof(float)));
  if (!is) throw std::runtime_error("truncated float grid: " + path);
  return g;
}

void write_pgm16_mm(const std::string& path, const FloatGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  char header[64];
  const int n = std::snprintf(header, sizeof(header), "P5\n%d %d\n65535\n", grid.cols, grid.rows);
  os.write(header, n);
  for (float v : grid.data) {
    double mm = std::floor(static_cast<double>(v) * 1000.0 + 0.5);
    mm = std::clamp(mm, 0.0, 65535.0);
    const uint16_t q = static_cast<uint16_t>(mm);
    const unsigned char b[2] = {static_cast<unsigned char>(q >> 8),
                                static_cast<unsigned char>(q & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
  }
}

}  // namespace bedsim
