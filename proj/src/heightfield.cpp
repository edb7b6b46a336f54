#include "bedsim/heightfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bedsim {

HeightField rasterize_heightfield(const TriMesh& mesh, int rows, int cols,
                                  double x0, double y0, double dx, double dy) {
  if (rows <= 0 || cols <= 0 || dx <= 0 || dy <= 0)
    throw std::invalid_argument("heightfield: bad grid");
  HeightField hf;
  hf.rows = rows;
  hf.cols = cols;
  hf.x0 = x0;
  hf.y0 = y0;
  hf.dx = dx;
  hf.dy = dy;
  const size_t n = static_cast<size_t>(rows) * cols;
  hf.top.assign(n, -std::numeric_limits<double>::infinity());
  hf.bottom.assign(n, std::numeric_limits<double>::infinity());
  hf.top_face.assign(n, -1);
  hf.bottom_face.assign(n, -1);
  hf.top_bary.assign(n, Vec3::Zero());
  hf.bottom_bary.assign(n, Vec3::Zero());

  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3& a = mesh.vertices[mesh.faces[f][0]];
    const Vec3& b = mesh.vertices[mesh.faces[f][1]];
    const Vec3& c = mesh.vertices[mesh.faces[f][2]];
    const double area2 = (b.x() - a.x()) * (c.y() - a.y()) -
                         (b.y() - a.y()) * (c.x() - a.x());
    if (std::abs(area2) < 1e-18) continue;  // vertical or degenerate in plan view
    const double min_x = std::min({a.x(), b.x(), c.x()});
    const double max_x = std::max({a.x(), b.x(), c.x()});
    const double min_y = std::min({a.y(), b.y(), c.y()});
    const double max_y = std::max({a.y(), b.y(), c.y()});
    // Cells whose center can lie inside the face's plan-view bounding box.
    int c_lo = static_cast<int>(std::floor((min_x - x0) / dx - 0.5));
    int c_hi = static_cast<int>(std::ceil((max_x - x0) / dx - 0.5));
    int r_lo = static_cast<int>(std::floor((min_y - y0) / dy - 0.5));
    int r_hi = static_cast<int>(std::ceil((max_y - y0) / dy - 0.5));
    c_lo = std::max(c_lo, 0);
    r_lo = std::max(r_lo, 0);
    c_hi = std::min(c_hi, cols - 1);
    r_hi = std::min(r_hi, rows - 1);
    const double inv = 1.0 / area2;
    for (int r = r_lo; r <= r_hi; ++r) {
      const double py = hf.cell_y(r);
      for (int cc = c_lo; cc <= c_hi; ++cc) {
        const double px = hf.cell_x(cc);
        // Signed sub-areas; all same-signed as area2 => inside (inclusive).
        const double w0 = ((b.x() - px) * (c.y() - py) - (b.y() - py) * (c.x() - px)) * inv;
        const double w1 = ((c.x() - px) * (a.y() - py) - (c.y() - py) * (a.x() - px)) * inv;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double z = w0 * a.z() + w1 * b.z() + w2 * c.z();
        const size_t i = hf.idx(r, cc);
        if (z > hf.top[i]) {
          hf.top[i] = z;
          hf.top_face[i] = static_cast<int>(f);
          hf.top_bary[i] = Vec3(w0, w1, w2);
        }
        if (z < hf.bottom[i]) {
          hf.bottom[i] = z;
          hf.bottom_face[i] = static_cast<int>(f);
          hf.bottom_bary[i] = Vec3(w0, w1, w2);
        }
      }
    }
  }
  return hf;
}

}  // namespace bedsim
