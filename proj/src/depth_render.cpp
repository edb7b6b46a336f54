#include "bedsim/depth_render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bedsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rasterizes one triangle into the z-buffer: screen-space barycentrics at
// pixel centers, perspective-correct depth via interpolated 1/Z.
void raster_face(const Vec3& a, const Vec3& b, const Vec3& c, const Camera& cam,
                 std::vector<double>& zbuf) {
  double ua, va, za, ub, vb, zb, uc, vc, zc;
  if (!cam.project(a, ua, va, za)) return;
  if (!cam.project(b, ub, vb, zb)) return;
  if (!cam.project(c, uc, vc, zc)) return;
  const double area2 = (ub - ua) * (vc - va) - (vb - va) * (uc - ua);
  if (std::abs(area2) < 1e-18) return;
  const double inv = 1.0 / area2;
  int c_lo = std::max(0, static_cast<int>(std::floor(std::min({ua, ub, uc}) - 0.5)));
  int c_hi = std::min(cam.cols - 1,
                      static_cast<int>(std::ceil(std::max({ua, ub, uc}) - 0.5)));
  int r_lo = std::max(0, static_cast<int>(std::floor(std::min({va, vb, vc}) - 0.5)));
  int r_hi = std::min(cam.rows - 1,
                      static_cast<int>(std::ceil(std::max({va, vb, vc}) - 0.5)));
  for (int r = r_lo; r <= r_hi; ++r) {
    const double pv = r + 0.5;
    for (int cc = c_lo; cc <= c_hi; ++cc) {
      const double pu = cc + 0.5;
      const double w0 = ((ub - pu) * (vc - pv) - (vb - pv) * (uc - pu)) * inv;
      const double w1 = ((uc - pu) * (va - pv) - (vc - pv) * (ua - pu)) * inv;
      const double w2 = 1.0 - w0 - w1;
      if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
      const double z = 1.0 / (w0 / za + w1 / zb + w2 / zc);
      double& slot = zbuf[static_cast<size_t>(r) * cam.cols + cc];
      if (z < slot) slot = z;
    }
  }
}

DepthGrid buffer_to_grid(const std::vector<double>& zbuf, const Camera& cam) {
  DepthGrid out;
  out.grid = FloatGrid(cam.rows, cam.cols, GridKind::kDepth);
  for (size_t i = 0; i < zbuf.size(); ++i)
    out.grid.data[i] =
        std::isfinite(zbuf[i]) ? static_cast<float>(zbuf[i]) : DepthGrid::kNoHit;
  return out;
}

}  // namespace

DepthGrid render_depth(const std::vector<const TriMesh*>& meshes, const Camera& cam) {
  if (cam.rows <= 0 || cam.cols <= 0 || cam.fx <= 0 || cam.fy <= 0)
    throw std::invalid_argument("render_depth: invalid camera");
  std::vector<double> zbuf(static_cast<size_t>(cam.rows) * cam.cols, kInf);
  for (const TriMesh* mesh : meshes)
    for (const auto& f : mesh->faces)
      raster_face(mesh->vertices[f[0]], mesh->vertices[f[1]], mesh->vertices[f[2]],
                  cam, zbuf);
  return buffer_to_grid(zbuf, cam);
}

DepthGrid render_depth(const std::vector<TriMesh>& meshes, const Camera& cam) {
  std::vector<const TriMesh*> ptrs;
  ptrs.reserve(meshes.size());
  for (const auto& m : meshes) ptrs.push_back(&m);
  return render_depth(ptrs, cam);
}

DepthGrid raycast_depth(const std::vector<const TriMesh*>& meshes, const Camera& cam) {
  std::vector<double> zbuf(static_cast<size_t>(cam.rows) * cam.cols, kInf);
  for (int r = 0; r < cam.rows; ++r) {
    for (int c = 0; c < cam.cols; ++c) {
      // Ray through the pixel center, parameterized by optical-axis depth.
      const Vec3 dir((c + 0.5 - cam.cx) / cam.fx, (r + 0.5 - cam.cy) / cam.fy, -1.0);
      double best = kInf;
      for (const TriMesh* mesh : meshes) {
        for (const auto& f : mesh->faces) {
          const Vec3& a = mesh->vertices[f[0]];
          const Vec3 e1 = mesh->vertices[f[1]] - a;
          const Vec3 e2 = mesh->vertices[f[2]] - a;
          const Vec3 p = dir.cross(e2);
          const double det = e1.dot(p);
          if (std::abs(det) < 1e-18) continue;
          const double inv = 1.0 / det;
          const Vec3 tv = cam.position - a;
          const double u = tv.dot(p) * inv;
          if (u < 0.0 || u > 1.0) continue;
          const Vec3 q = tv.cross(e1);
          const double v = dir.dot(q) * inv;
          if (v < 0.0 || u + v > 1.0) continue;
          const double t = e2.dot(q) * inv;
          if (t > 1e-9 && t < best) best = t;
        }
      }
      zbuf[static_cast<size_t>(r) * cam.cols + c] = best;
    }
  }
  return buffer_to_grid(zbuf, cam);
}

DepthGrid apply_noise(const DepthGrid& depth, const BedScene& scene,
                      const Camera& cam, Rng& rng, const DepthNoiseParams& p) {
  DepthGrid out = depth;
  if (p.is_identity()) return out;
  FloatGrid& g = out.grid;
  auto live = [&](int r, int c) { return g.at(r, c) != DepthGrid::kNoHit; };

  if (p.shift_max > 0.0) {
    const double dz = rng.uniform(-p.shift_max, p.shift_max);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c)
        if (live(r, c)) g.at(r, c) = static_cast<float>(g.at(r, c) + dz);
  }

  if (p.sag_max > 0.0) {
    // Bed frame sag: a product of parabolas that vanishes on the mattress
    // outline and peaks in the center; surfaces move away from the camera.
    const double peak = rng.uniform(0.0, p.sag_max);
    const double surface_depth = cam.position.z() - scene.bed_surface();
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        if (!live(r, c)) continue;
        const Vec2 xy = cam.pixel_to_plane(r, c, surface_depth);
        const double fx = xy.x() / scene.width;
        const double fy = xy.y() / scene.length;
        if (fx < 0.0 || fx > 1.0 || fy < 0.0 || fy > 1.0) continue;
        const double sag = peak * (4.0 * fx * (1.0 - fx)) * (4.0 * fy * (1.0 - fy));
        g.at(r, c) = static_cast<float>(g.at(r, c) + sag);
      }
    }
  }

  if (p.white_std > 0.0) {
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c)
        if (live(r, c))
          g.at(r, c) = static_cast<float>(g.at(r, c) + rng.normal(0.0, p.white_std));
  }

  if (p.dropout > 0.0) {
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c)
        if (live(r, c) && rng.unit() < p.dropout) g.at(r, c) = DepthGrid::kNoHit;
  }

  if (p.max_patches > 0) {
    const int patches = static_cast<int>(rng.below(p.max_patches + 1));
    for (int k = 0; k < patches; ++k) {
      const int pw = std::max(
          1, static_cast<int>(std::lround(rng.uniform(p.patch_min, p.patch_max) * g.cols)));
      const int ph = std::max(
          1, static_cast<int>(std::lround(rng.uniform(p.patch_min, p.patch_max) * g.cols)));
      const int c0 = static_cast<int>(rng.below(std::max(1, g.cols - pw + 1)));
      const int r0 = static_cast<int>(rng.below(std::max(1, g.rows - ph + 1)));
      for (int r = r0; r < std::min(g.rows, r0 + ph); ++r)
        for (int c = c0; c < std::min(g.cols, c0 + pw); ++c)
          g.at(r, c) = DepthGrid::kNoHit;
    }
  }
  return out;
}

}  // namespace bedsim
