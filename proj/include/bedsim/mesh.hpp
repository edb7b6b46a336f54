#pragma once

#include "bedsim/core.hpp"

#include <array>
#include <string>
#include <vector>

namespace bedsim {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  size_t vertex_count() const { return vertices.size(); }
  size_t face_count() const { return faces.size(); }
  void translate(const Vec3& d) {
    for (auto& v : vertices) v += d;
  }
};

struct VolumeResult {
  double volume = 0.0;    // m^3, signed tetrahedron sum (positive for
                          // consistently outward-oriented closed meshes)
  bool watertight = true; // false means the value is unreliable
};

// Signed volume via the divergence theorem: sum of tetrahedra spanned by the
// origin and each face. Exact for watertight meshes regardless of placement.
VolumeResult mesh_volume(const TriMesh& mesh);

// True when every edge is shared by exactly two faces with opposite winding
// and all face indices are in range.
bool is_watertight(const TriMesh& mesh);

// Per-vertex average area of adjacent triangles (m^2).
std::vector<double> vertex_adjacent_area(const TriMesh& mesh);

// Wavefront OBJ ("v"/"f" lines only). Vertices are printed with enough digits
// to round-trip doubles bit-exactly.
void write_obj(const std::string& path, const TriMesh& mesh);
TriMesh read_obj(const std::string& path);

// Grid-sheet helper: builds a (rows x cols) vertex sheet triangulated into
// 2*(rows-1)*(cols-1) faces; used to export particle lattices as meshes.
TriMesh sheet_mesh(int rows, int cols, const std::vector<Vec3>& vertices);

}  // namespace bedsim
