#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bedsim {

// Payload tag stored in the portable float-grid header.
enum class GridKind : uint8_t {
  kDepth = 0,        // camera depth image, meters; 0 = no hit
  kPressure = 1,     // mass-normalized pressure, kPa
  kPressureRaw = 2,  // un-normalized pressure, kPa
  kDepthRecon = 3,   // camera-plane-to-body distance map, meters
  kSinkRecon = 4,    // body-below-bed-surface sink map, meters
  kContact = 5,      // binary contact map
  kPenetration = 6,  // per-taxel mat penetration, meters
};

// Dense row-major float32 grid. Geometry convention for bed-aligned grids:
// row 0 is the bed-origin end (y = 0), column 0 the x = 0 edge.
struct FloatGrid {
  int rows = 0;
  int cols = 0;
  GridKind kind = GridKind::kDepth;
  std::vector<float> data;

  FloatGrid() = default;
  FloatGrid(int r, int c, GridKind k, float fill = 0.0f)
      : rows(r), cols(c), kind(k), data(static_cast<size_t>(r) * c, fill) {}

  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }

  float max_value() const;
  double sum() const;
  bool bitwise_equal(const FloatGrid& other) const;
};

// 64x27 taxel pressure grid plus its physical metadata.
struct PressureGrid {
  FloatGrid grid;          // kPa
  double taxel_area = 0.0; // A_t, m^2
  bool normalized = false; // true once scaled so sum(p)*A_t == m*g
};

// Camera depth image. Value 0 marks rays that hit nothing.
struct DepthGrid {
  FloatGrid grid;  // meters along the optical axis
  static constexpr float kNoHit = 0.0f;
};

// Portable float grid: "PFG1" magic, u32 rows, u32 cols, u8 kind, then
// row-major little-endian float32 payload. Round-trips bit-exactly.
void write_pfg(const std::string& path, const FloatGrid& grid);
FloatGrid read_pfg(const std::string& path);

// 16-bit binary PGM (P5, maxval 65535) with values in millimeters rounded
// half-up and clamped; lossy, intended for quick visualization only.
void write_pgm16_mm(const std::string& path, const FloatGrid& grid);

}  // namespace bedsim
