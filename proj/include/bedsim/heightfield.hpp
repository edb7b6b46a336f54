#pragma once

#include "bedsim/mesh.hpp"

#include <cmath>

namespace bedsim {

// Top-down (plan-view) envelope of a triangle mesh on a regular (x, y) grid.
// Cell (r, c) samples the vertical line through its center; `top`/`bottom`
// hold the highest/lowest surface z on that line plus the winning face and
// its barycentric coordinates (for analytic derivatives). Uncovered cells
// have face -1. Shared by the reconstruction maps, the cloth/body contact
// queries, and the settling solver.
struct HeightField {
  int rows = 0, cols = 0;
  double x0 = 0, y0 = 0, dx = 0, dy = 0;

  std::vector<double> top, bottom;
  std::vector<int> top_face, bottom_face;
  std::vector<Vec3> top_bary, bottom_bary;

  size_t idx(int r, int c) const { return static_cast<size_t>(r) * cols + c; }
  bool covered(int r, int c) const { return top_face[idx(r, c)] >= 0; }
  double cell_x(int c) const { return x0 + (c + 0.5) * dx; }
  double cell_y(int r) const { return y0 + (r + 0.5) * dy; }
  // Cell containing (x, y), or false when outside the grid.
  bool locate(double x, double y, int& r, int& c) const {
    c = static_cast<int>(std::floor((x - x0) / dx));
    r = static_cast<int>(std::floor((y - y0) / dy));
    return r >= 0 && r < rows && c >= 0 && c < cols;
  }
};

// Rasterizes every non-degenerate (in plan view) face over the cell centers.
// Inclusive edge test; on exact z ties the earlier face index wins.
HeightField rasterize_heightfield(const TriMesh& mesh, int rows, int cols,
                                  double x0, double y0, double dx, double dy);

}  // namespace bedsim
