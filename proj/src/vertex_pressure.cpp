#include "bedsim/vertex_pressure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace bedsim {

namespace {

// Maps x to the taxel column holding it: floor(x / dx), with exact-boundary
// points assigned to the lower-index taxel and the far mat edge included.
int taxel_of(double x, double dx, int count) {
  if (x < 0.0 || x > dx * count) return -1;
  int c = static_cast<int>(std::floor(x / dx));
  if (c > 0 && x == c * dx) --c;
  if (c >= count) c = count - 1;
  return c;
}

struct FaceBins {
  int nx = 0, ny = 0;
  double x0 = 0, y0 = 0, dx = 1, dy = 1;
  std::vector<std::vector<int>> faces;

  int clamp_bx(int b) const { return std::min(std::max(b, 0), nx - 1); }
  int clamp_by(int b) const { return std::min(std::max(b, 0), ny - 1); }
};

FaceBins build_bins(const TriMesh& mesh, int resolution) {
  FaceBins bins;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!mesh.vertices.empty()) {
    xmin = ymin = std::numeric_limits<double>::infinity();
    xmax = ymax = -xmin;
    for (const auto& v : mesh.vertices) {
      xmin = std::min(xmin, v.x());
      xmax = std::max(xmax, v.x());
      ymin = std::min(ymin, v.y());
      ymax = std::max(ymax, v.y());
    }
  }
  bins.nx = bins.ny = resolution;
  bins.x0 = xmin;
  bins.y0 = ymin;
  bins.dx = std::max(1e-12, (xmax - xmin) / resolution);
  bins.dy = std::max(1e-12, (ymax - ymin) / resolution);
  bins.faces.resize(static_cast<size_t>(resolution) * resolution);
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3& a = mesh.vertices[mesh.faces[f][0]];
    const Vec3& b = mesh.vertices[mesh.faces[f][1]];
    const Vec3& c = mesh.vertices[mesh.faces[f][2]];
    const int bx0 = bins.clamp_bx(
        static_cast<int>(std::floor((std::min({a.x(), b.x(), c.x()}) - bins.x0) / bins.dx)));
    const int bx1 = bins.clamp_bx(
        static_cast<int>(std::floor((std::max({a.x(), b.x(), c.x()}) - bins.x0) / bins.dx)));
    const int by0 = bins.clamp_by(
        static_cast<int>(std::floor((std::min({a.y(), b.y(), c.y()}) - bins.y0) / bins.dy)));
    const int by1 = bins.clamp_by(
        static_cast<int>(std::floor((std::max({a.y(), b.y(), c.y()}) - bins.y0) / bins.dy)));
    for (int by = by0; by <= by1; ++by)
      for (int bx = bx0; bx <= bx1; ++bx)
        bins.faces[static_cast<size_t>(by) * bins.nx + bx].push_back(static_cast<int>(f));
  }
  return bins;
}

template <typename FaceRange>
bool any_face_hit(const TriMesh& mesh, const Vec3& origin, const FaceRange& faces) {
  for (int f : faces) {
    const auto& tri = mesh.faces[f];
    if (ray_hits_face(origin, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                      mesh.vertices[tri[2]]))
      return true;
  }
  return false;
}

template <typename OccludedFn>
VertexPressure project_common(const PressureGrid& grid, const TriMesh& mesh,
                              const BedScene& scene, OccludedFn&& is_occluded) {
  if (grid.grid.rows != scene.taxel_rows || grid.grid.cols != scene.taxel_cols)
    throw std::invalid_argument("project_pressure: grid does not match the scene");
  const size_t n = mesh.vertices.size();
  VertexPressure vp;
  vp.pressure.assign(n, 0.0);
  vp.area_weight = vertex_adjacent_area(mesh);
  vp.occluded.assign(n, 0);
  for (size_t j = 0; j < n; ++j) {
    const Vec3& v = mesh.vertices[j];
    if (is_occluded(Vec3(v.x(), v.y(), v.z() - 1e-6))) {
      vp.occluded[j] = 1;
      continue;
    }
    const int c = taxel_of(v.x(), scene.taxel_dx(), scene.taxel_cols);
    const int r = taxel_of(v.y(), scene.taxel_dy(), scene.taxel_rows);
    if (c < 0 || r < 0) continue;
    vp.pressure[j] = grid.grid.at(r, c);
  }
  return vp;
}

}  // namespace

bool ray_hits_face(const Vec3& origin, const Vec3& a, const Vec3& b, const Vec3& c) {
  const double area2 =
      (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  if (std::abs(area2) < 1e-18) return false;  // plan-view degenerate face
  const double inv = 1.0 / area2;
  const double px = origin.x(), py = origin.y();
  const double w0 =
      ((b.x() - px) * (c.y() - py) - (b.y() - py) * (c.x() - px)) * inv;
  if (w0 < 0.0) return false;
  const double w1 =
      ((c.x() - px) * (a.y() - py) - (c.y() - py) * (a.x() - px)) * inv;
  if (w1 < 0.0) return false;
  const double w2 = 1.0 - w0 - w1;
  if (w2 < 0.0) return false;
  const double z_hit = w0 * a.z() + w1 * b.z() + w2 * c.z();
  return origin.z() - z_hit > 0.0;
}

VertexPressure project_pressure_brute(const PressureGrid& grid, const TriMesh& mesh,
                                      const BedScene& scene) {
  std::vector<int> all(mesh.faces.size());
  for (size_t f = 0; f < all.size(); ++f) all[f] = static_cast<int>(f);
  return project_common(grid, mesh, scene, [&](const Vec3& origin) {
    return any_face_hit(mesh, origin, all);
  });
}

VertexPressure project_pressure(const PressureGrid& grid, const TriMesh& mesh,
                                const BedScene& scene) {
  const FaceBins bins = build_bins(mesh, 64);
  return project_common(grid, mesh, scene, [&](const Vec3& origin) {
    const int bx = bins.clamp_bx(
        static_cast<int>(std::floor((origin.x() - bins.x0) / bins.dx)));
    const int by = bins.clamp_by(
        static_cast<int>(std::floor((origin.y() - bins.y0) / bins.dy)));
    return any_face_hit(mesh, origin,
                        bins.faces[static_cast<size_t>(by) * bins.nx + bx]);
  });
}

double v2vp_mse(const VertexPressure& a, const VertexPressure& b) {
  if (a.size() != b.size() || a.size() == 0)
    throw std::invalid_argument("v2vp_mse: vertex counts must match and be nonzero");
  double mean_area = 0.0;
  for (double w : a.area_weight) mean_area += w;
  mean_area /= static_cast<double>(a.size());
  if (mean_area <= 0.0) throw std::invalid_argument("v2vp_mse: degenerate areas");
  double acc = 0.0;
  for (size_t j = 0; j < a.size(); ++j) {
    const double w = a.area_weight[j] / mean_area;
    const double d = w * (a.pressure[j] - b.pressure[j]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

void write_vertex_pressure_csv(const std::string& path, const VertexPressure& vp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "index,pressure_kpa,area_weight_m2,occluded\n";
  out.precision(17);
  for (size_t j = 0; j < vp.size(); ++j)
    out << j << ',' << vp.pressure[j] << ',' << vp.area_weight[j] << ','
        << static_cast<int>(vp.occluded[j]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_vertex_pressure_obj(const std::string& path, const TriMesh& mesh,
                               const VertexPressure& vp) {
  if (vp.size() != mesh.vertices.size())
    throw std::invalid_argument("vertex pressure does not match mesh");
  double peak = 0.0;
  for (double p : vp.pressure) peak = std::max(peak, p);
  if (peak <= 0.0) peak = 1.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  for (size_t j = 0; j < mesh.vertices.size(); ++j) {
    const Vec3& v = mesh.vertices[j];
    double r = 0.5, g = 0.5, b = 0.5;
    if (!vp.occluded[j]) {
      const double t = vp.pressure[j] / peak;
      r = t;
      g = 0.1;
      b = 1.0 - t;
    }
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << ' ' << r << ' ' << g
        << ' ' << b << '\n';
  }
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace bedsim
