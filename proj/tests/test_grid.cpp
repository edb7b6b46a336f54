#include "bedsim/grid.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"

using namespace bedsim;
namespace fs = std::filesystem;

namespace {
fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}
}  // namespace

TEST_SUITE("grid") {

TEST_CASE("pfg round-trips bit-exactly") {
  FloatGrid g(5, 7, GridKind::kSinkRecon);
  float specials[] = {0.0f, -0.0f, 1.25f, -3e-30f, 3e30f,
                      std::numeric_limits<float>::infinity(),
                      std::numeric_limits<float>::quiet_NaN(),
                      std::numeric_limits<float>::denorm_min()};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 7; ++c)
      g.at(r, c) = specials[(r * 7 + c) % 8] + static_cast<float>(r * 7 + c) * 0.001f;
  const auto path = temp_file("bedsim_test_grid.pfg");
  write_pfg(path.string(), g);
  const FloatGrid back = read_pfg(path.string());
  CHECK(back.rows == 5);
  CHECK(back.cols == 7);
  CHECK(back.kind == GridKind::kSinkRecon);
  CHECK(back.bitwise_equal(g));
  fs::remove(path);
}

TEST_CASE("pfg rejects malformed files") {
  const auto path = temp_file("bedsim_test_bad.pfg");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS(read_pfg(path.string()));
  {
    FloatGrid g(2, 2, GridKind::kDepth);
    write_pfg(path.string(), g);
    // Truncate the payload.
    fs::resize_file(path, 13 + 3 * sizeof(float));
  }
  CHECK_THROWS(read_pfg(path.string()));
  CHECK_THROWS(read_pfg((temp_file("bedsim_missing_dir") / "x.pfg").string()));
  fs::remove(path);
}

TEST_CASE("grid accessors") {
  FloatGrid g(3, 4, GridKind::kPressure, 2.0f);
  g.at(1, 2) = -5.0f;
  g.at(2, 3) = 9.0f;
  CHECK(g.at(1, 2) == -5.0f);
  CHECK(g.max_value() == 9.0f);
  CHECK(g.sum() == doctest::Approx(2.0 * 10 + (-5.0) + 9.0));
  FloatGrid h = g;
  CHECK(g.bitwise_equal(h));
  h.at(0, 0) = std::nextafter(2.0f, 3.0f);
  CHECK(!g.bitwise_equal(h));
}

TEST_CASE("pgm16 export writes valid header and mm quantization") {
  FloatGrid g(2, 3, GridKind::kDepth);
  g.at(0, 0) = 0.0015f;   // 1.5 mm -> rounds half-up to 2
  g.at(0, 1) = 1.0f;      // 1000 mm
  g.at(0, 2) = -4.0f;     // clamps to 0
  g.at(1, 0) = 1e6f;      // clamps to 65535
  const auto path = temp_file("bedsim_test.pgm");
  write_pgm16_mm(path.string(), g);
  std::ifstream in(path, std::ios::binary);
  std::string magic, w, h, maxv;
  in >> magic >> w >> h >> maxv;
  CHECK(magic == "P5");
  CHECK(w == "3");
  CHECK(h == "2");
  CHECK(maxv == "65535");
  in.get();  // single whitespace before payload
  unsigned char px[12];
  in.read(reinterpret_cast<char*>(px), 12);
  CHECK(in.gcount() == 12);
  auto val = [&](int i) { return (px[2 * i] << 8) | px[2 * i + 1]; };  // big-endian
  CHECK(val(0) == 2);
  CHECK(val(1) == 1000);
  CHECK(val(2) == 0);
  CHECK(val(3) == 65535);
  fs::remove(path);
}

}  // TEST_SUITE
