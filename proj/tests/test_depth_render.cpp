#include "bedsim/depth_render.hpp"

#include "doctest.h"

#include <cmath>
#include <vector>

using namespace bedsim;

namespace {

TriMesh quad(double x0, double x1, double y0, double y1, double z) {
  TriMesh m;
  m.vertices = {{x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

TriMesh uv_sphere(const Vec3& center, double radius, int stacks, int slices) {
  TriMesh m;
  for (int i = 0; i <= stacks; ++i) {
    const double phi = M_PI * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double th = 2.0 * M_PI * j / slices;
      m.vertices.push_back(center + radius * Vec3(std::sin(phi) * std::cos(th),
                                                  std::sin(phi) * std::sin(th),
                                                  std::cos(phi)));
    }
  }
  auto id = [&](int i, int j) { return i * slices + (j % slices); };
  for (int i = 0; i < stacks; ++i)
    for (int j = 0; j < slices; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return m;
}

TriMesh random_soup(Rng& rng, int n_faces, const BedScene& scene) {
  TriMesh m;
  for (int f = 0; f < n_faces; ++f) {
    const Vec3 base(rng.uniform(0.0, scene.width), rng.uniform(0.0, scene.length),
                    rng.uniform(0.2, 1.4));
    for (int k = 0; k < 3; ++k)
      m.vertices.push_back(base + Vec3(rng.uniform(-0.2, 0.2),
                                       rng.uniform(-0.2, 0.2),
                                       rng.uniform(-0.1, 0.1)));
    m.faces.push_back({3 * f, 3 * f + 1, 3 * f + 2});
  }
  return m;
}

DepthGrid flat_grid(int rows, int cols, float value) {
  DepthGrid d;
  d.grid = FloatGrid(rows, cols, GridKind::kDepth, value);
  return d;
}

int count_sentinel(const DepthGrid& d) {
  int n = 0;
  for (float v : d.grid.data)
    if (v == DepthGrid::kNoHit) ++n;
  return n;
}

}  // namespace

TEST_SUITE("depth_render") {

TEST_CASE("flat plane renders its exact camera distance everywhere") {
  const BedScene scene;
  const Camera cam = scene.camera();
  const TriMesh plane = quad(-2.0, 3.0, -2.0, 4.0, cam.position.z() - 1.2);
  const DepthGrid d = render_depth({&plane}, cam);
  for (float v : d.grid.data) CHECK(v == 1.2f);

  TriMesh lower = plane;
  lower.translate(Vec3(0, 0, -0.05));
  const DepthGrid d2 = render_depth({&lower}, cam);
  for (float v : d2.grid.data) CHECK(v == 1.25f);
}

TEST_CASE("z-buffer keeps the nearest of two overlapping surfaces") {
  const BedScene scene;
  const Camera cam = scene.camera();
  const TriMesh far_plane = quad(-2.0, 3.0, -2.0, 4.0, cam.position.z() - 1.4);
  const TriMesh near_quad =
      quad(0.3, 0.7, 0.8, 1.3, cam.position.z() - 1.0);  // central patch
  const std::vector<const TriMesh*> meshes{&far_plane, &near_quad};
  const DepthGrid d = render_depth(meshes, cam);
  CHECK(d.grid.at(cam.rows / 2, cam.cols / 2) == 1.0f);
  CHECK(d.grid.at(0, 0) == 1.4f);
  CHECK(d.grid.at(cam.rows - 1, cam.cols - 1) == 1.4f);
  // Pixel count under the near quad matches its footprint fraction roughly.
  int near_px = 0;
  for (float v : d.grid.data)
    if (v == 1.0f) ++near_px;
  CHECK(near_px > 0);
  CHECK(near_px < static_cast<int>(d.grid.size()));
}

TEST_CASE("sphere minimum depth equals center distance minus radius") {
  const BedScene scene;
  const Camera cam = scene.camera();
  const Vec3 center(scene.width / 2, scene.length / 2, cam.position.z() - 1.1);
  const TriMesh sphere = uv_sphere(center, 0.25, 32, 48);
  const DepthGrid d = render_depth({&sphere}, cam);
  double min_depth = 1e9;
  for (float v : d.grid.data)
    if (v != DepthGrid::kNoHit) min_depth = std::min(min_depth, double(v));
  CHECK(min_depth == doctest::Approx(1.1 - 0.25).epsilon(0.005));
  // Pixels outside the silhouette keep the no-hit sentinel.
  CHECK(count_sentinel(d) > 0);
}

TEST_CASE("rasterizer agrees with the ray-casting oracle") {
  const BedScene scene;
  const Camera cam = scene.camera(40, 18);
  size_t total = 0, mismatched = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const TriMesh soup = random_soup(rng, 40, scene);
    const DepthGrid a = render_depth({&soup}, cam);
    const DepthGrid b = raycast_depth({&soup}, cam);
    for (size_t i = 0; i < a.grid.size(); ++i) {
      ++total;
      if (std::abs(a.grid.data[i] - b.grid.data[i]) > 1e-6f) ++mismatched;
    }
  }
  const TriMesh sphere =
      uv_sphere(Vec3(scene.width / 2, scene.length / 2, 0.6), 0.3, 24, 32);
  const DepthGrid a = render_depth({&sphere}, cam);
  const DepthGrid b = raycast_depth({&sphere}, cam);
  for (size_t i = 0; i < a.grid.size(); ++i) {
    ++total;
    if (std::abs(a.grid.data[i] - b.grid.data[i]) > 1e-6f) ++mismatched;
  }
  CHECK(mismatched <= total / 1000);
}

TEST_CASE("zero-magnitude noise is the bitwise identity and draws nothing") {
  const BedScene scene;
  const Camera cam = scene.camera();
  DepthGrid d = flat_grid(cam.rows, cam.cols, 1.6f);
  d.grid.at(3, 3) = DepthGrid::kNoHit;
  Rng rng(99);
  const DepthGrid out = apply_noise(d, scene, cam, rng, DepthNoiseParams::none());
  CHECK(out.grid.bitwise_equal(d.grid));
  Rng fresh(99);
  CHECK(rng.next_u64() == fresh.next_u64());  // no draws were consumed
}

TEST_CASE("global shift moves every live pixel together, bounded by the limit") {
  const BedScene scene;
  const Camera cam = scene.camera();
  DepthNoiseParams p = DepthNoiseParams::none();
  p.shift_max = 0.05;
  DepthGrid d = flat_grid(cam.rows, cam.cols, 1.6f);
  d.grid.at(0, 0) = DepthGrid::kNoHit;
  double min_dz = 1e9, max_dz = -1e9;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const DepthGrid out = apply_noise(d, scene, cam, rng, p);
    const double dz = out.grid.at(5, 5) - 1.6;
    CHECK(std::abs(dz) <= 0.05);
    CHECK(out.grid.at(0, 0) == DepthGrid::kNoHit);  // sentinel untouched
    for (int r = 0; r < cam.rows; r += 11)
      for (int c = 0; c < cam.cols; c += 7)
        if (!(r == 0 && c == 0))
          CHECK(out.grid.at(r, c) == out.grid.at(5, 5));  // one shared offset
    min_dz = std::min(min_dz, dz);
    max_dz = std::max(max_dz, dz);
  }
  CHECK(min_dz < -0.03);  // the draw actually spans the interval
  CHECK(max_dz > 0.03);
}

TEST_CASE("sag follows the centered parabola profile and respects its peak") {
  const BedScene scene;
  const Camera cam = scene.camera();
  DepthNoiseParams p = DepthNoiseParams::none();
  p.sag_max = 0.10;
  const DepthGrid d = flat_grid(cam.rows, cam.cols, 1.6f);
  const double surface_depth = cam.position.z() - scene.bed_surface();
  double largest_peak = 0.0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const DepthGrid out = apply_noise(d, scene, cam, rng, p);
    // Recover the drawn peak from one pixel, then check the whole profile.
    const int rr = cam.rows / 2, rc = cam.cols / 2;
    const Vec2 ref = cam.pixel_to_plane(rr, rc, surface_depth);
    const double ref_w = 4.0 * (ref.x() / scene.width) * (1.0 - ref.x() / scene.width) *
                         4.0 * (ref.y() / scene.length) * (1.0 - ref.y() / scene.length);
    const double peak = (out.grid.at(rr, rc) - 1.6) / ref_w;
    CHECK(peak >= -1e-6);
    CHECK(peak <= 0.10 + 1e-6);
    largest_peak = std::max(largest_peak, peak);
    for (int r = 0; r < cam.rows; r += 7) {
      for (int c = 0; c < cam.cols; c += 5) {
        const Vec2 xy = cam.pixel_to_plane(r, c, surface_depth);
        const double w = 4.0 * (xy.x() / scene.width) * (1.0 - xy.x() / scene.width) *
                         4.0 * (xy.y() / scene.length) * (1.0 - xy.y() / scene.length);
        CHECK(std::abs((out.grid.at(r, c) - 1.6) - peak * w) < 1e-5);
      }
    }
    // Edge pixels sag by a vanishing fraction of the peak.
    CHECK(out.grid.at(0, 0) - 1.6 <= 0.001 * 0.10 + 1e-6);
  }
  CHECK(largest_peak > 0.07);  // the U[0, max] draw reaches high values
}

TEST_CASE("sag is confined to the mattress footprint") {
  const BedScene scene;
  Camera cam = scene.camera();
  cam.fx /= 2.0;  // widen the horizontal field: edge columns leave the mat
  DepthNoiseParams p = DepthNoiseParams::none();
  p.sag_max = 0.10;
  const DepthGrid d = flat_grid(cam.rows, cam.cols, 1.6f);
  Rng rng(7);
  const DepthGrid out = apply_noise(d, scene, cam, rng, p);
  const double surface_depth = cam.position.z() - scene.bed_surface();
  int outside = 0;
  for (int r = 0; r < cam.rows; ++r) {
    for (int c = 0; c < cam.cols; ++c) {
      const Vec2 xy = cam.pixel_to_plane(r, c, surface_depth);
      if (xy.x() < 0.0 || xy.x() > scene.width) {
        CHECK(out.grid.at(r, c) == 1.6f);  // untouched outside the mat
        ++outside;
      }
    }
  }
  CHECK(outside > 0);
}

TEST_CASE("white noise perturbs live pixels with the configured deviation") {
  const BedScene scene;
  const Camera cam = scene.camera();
  DepthNoiseParams p = DepthNoiseParams::none();
  p.white_std = 0.002;
  DepthGrid d = flat_grid(cam.rows, cam.cols, 1.6f);
  d.grid.at(1, 1) = DepthGrid::kNoHit;
  Rng rng(3);
  const DepthGrid out = apply_noise(d, scene, cam, rng, p);
  CHECK(out.grid.at(1, 1) == DepthGrid::kNoHit);
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (int r = 0; r < cam.rows; ++r)
    for (int c = 0; c < cam.cols; ++c) {
      if (r == 1 && c == 1) continue;
      const double e = out.grid.at(r, c) - 1.6;
      sum += e;
      sq += e * e;
      ++n;
    }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 5e-4);
  CHECK(sd == doctest::Approx(0.002).epsilon(0.15));
}

TEST_CASE("dropout hits roughly the configured fraction of live pixels") {
  const BedScene scene;
  const Camera cam = scene.camera();
  DepthNoiseParams p = DepthNoiseParams::none();
  p.dropout = 0.01;
  const DepthGrid d = flat_grid(cam.rows, cam.cols, 1.6f);
  int dropped = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    dropped += count_sentinel(apply_noise(d, scene, cam, rng, p));
  }
  CHECK(dropped > 900);   // 20 * 6912 * 0.01 = 1382 expected
  CHECK(dropped < 1900);
}

TEST_CASE("occlusion patches blank out bounded rectangles") {
  const BedScene scene;
  const Camera cam = scene.camera();
  DepthNoiseParams p = DepthNoiseParams::none();
  p.max_patches = 2;
  p.patch_min = 0.05;
  p.patch_max = 0.20;
  const DepthGrid d = flat_grid(cam.rows, cam.cols, 1.6f);
  bool saw_zero_patches = false, saw_some = false;
  for (uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed);
    const int n = count_sentinel(apply_noise(d, scene, cam, rng, p));
    CHECK(n <= 2 * 11 * 11);  // two patches of at most ceil(0.2*54) px a side
    if (n == 0) saw_zero_patches = true;
    if (n > 0) saw_some = true;
  }
  CHECK(saw_zero_patches);
  CHECK(saw_some);
}

TEST_CASE("noise is reproducible for a fixed seed and varies across seeds") {
  const BedScene scene;
  const Camera cam = scene.camera();
  const DepthNoiseParams p;  // all stages active
  const DepthGrid d = flat_grid(cam.rows, cam.cols, 1.6f);
  Rng r1(42), r2(42), r3(43);
  const DepthGrid a = apply_noise(d, scene, cam, r1, p);
  const DepthGrid b = apply_noise(d, scene, cam, r2, p);
  const DepthGrid c = apply_noise(d, scene, cam, r3, p);
  CHECK(a.grid.bitwise_equal(b.grid));
  CHECK_FALSE(a.grid.bitwise_equal(c.grid));
}

}  // TEST_SUITE
