#pragma once

#include "bedsim/grid.hpp"
#include "bedsim/mesh.hpp"
#include "bedsim/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bedsim {

// Per-vertex pressure assignment together with the area weights used by the
// vertex-to-vertex metric. Occluded vertices always carry pressure 0.
struct VertexPressure {
  std::vector<double> pressure;     // kPa
  std::vector<double> area_weight;  // average adjacent-triangle area, m^2
  std::vector<uint8_t> occluded;    // 1 = a downward ray hits another face

  size_t size() const { return pressure.size(); }
};

// True when the downward ray from `origin` (cast from 1e-6 m below the query
// vertex) strictly hits triangle (a, b, c); edges and corners count as hits.
bool ray_hits_face(const Vec3& origin, const Vec3& a, const Vec3& b, const Vec3& c);

// Assigns each vertex the pressure of the taxel whose footprint contains its
// (x, y); boundary points go to the smaller (row, col) taxel. Vertices outside
// the mat footprint get 0, and vertices whose downward ray hits any mesh face
// get 0 and are flagged occluded. Accelerated by plan-view face binning.
VertexPressure project_pressure(const PressureGrid& grid, const TriMesh& mesh,
                                const BedScene& scene);

// Reference implementation testing every vertex against every face.
VertexPressure project_pressure_brute(const PressureGrid& grid, const TriMesh& mesh,
                                      const BedScene& scene);

// Mean over vertices of the squared area-weight-normalized pressure
// difference; weights are a's area weights divided by their mean.
double v2vp_mse(const VertexPressure& a, const VertexPressure& b);

// index,pressure,area_weight,occluded rows with a header line.
void write_vertex_pressure_csv(const std::string& path, const VertexPressure& vp);

// OBJ with per-vertex colors ("v x y z r g b"): pressure as a blue-to-red
// ramp, occluded vertices gray.
void write_vertex_pressure_obj(const std::string& path, const TriMesh& mesh,
                               const VertexPressure& vp);

}  // namespace bedsim
