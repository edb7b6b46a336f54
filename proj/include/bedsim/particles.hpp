#pragma once

#include "bedsim/core.hpp"
#include "bedsim/grid.hpp"
#include "bedsim/mesh.hpp"
#include "bedsim/scene.hpp"

#include <cstdint>
#include <vector>

namespace bedsim {

// Pairwise distance constraint projected toward its rest length; stiffness
// in (0, 1] scales each correction (classic cloth-style softening).
struct DistanceConstraint {
  int a = 0, b = 0;
  double rest = 1.0;
  double stiffness = 1.0;
};

// Flat particle state shared by the bed lattice and the cloth solver.
struct ParticleSystem {
  std::vector<Vec3> pos, prev;
  std::vector<double> inv_mass;  // 0 = immovable
  std::vector<uint8_t> frozen;   // bookkeeping flag for audits
  std::vector<DistanceConstraint> constraints;

  size_t size() const { return pos.size(); }
  int add(const Vec3& p, double inv_m);
  void freeze(int i);
  // Adds a constraint with rest length set to the current distance.
  void link(int a, int b, double stiffness = 1.0);
  // One Gauss-Seidel sweep over all constraints in construction order;
  // returns the largest position change it applied. Frozen endpoints are
  // never written.
  double project_once();
  double max_link_residual() const;  // max |len - rest| / rest
  bool all_finite() const;
};

// Quasi-static bed stack: a frozen base sheet, the mattress top sheet, and
// the two sensing-mat layers, one particle per taxel per layer. Each taxel
// column is three springs in series (base->mattress->lower->upper), solved
// in closed form through the column force; neighboring columns are coupled
// by a shear spring grid on the top sheet, relaxed by projected
// Gauss-Seidel against the body ceiling. Nothing here carries gravity — an
// empty bed stays exactly at rest, so an empty bed reads exactly zero.
struct BedLattice {
  ParticleSystem ps;  // 4 * rows * cols particles; base layer frozen
  int rows = 0, cols = 0;
  int base0 = 0, mattress0 = 0, lower0 = 0, upper0 = 0;
  double rest_mattress = 0.0, rest_lower = 0.0, rest_upper = 0.0;
  double k_base = 0.0, k_lower = 0.0, k_sense = 0.0;  // N/m per column
  double k_column = 0.0;  // series stiffness of one column
  double k_shear = 0.0;   // neighbor z-coupling of the top sheet

  static BedLattice build(const BedScene& scene);

  // Pushes the lattice against a per-taxel ceiling (+inf where the body does
  // not cover the taxel). Gauss-Seidel sweeps until the largest top-sheet
  // move drops below eps. Returns sweeps used, or -1 if the cap hits.
  int relax(const std::vector<double>& ceiling, double eps, int max_sweeps);

  // Per-taxel column force implied by the top-sheet compression, newtons.
  double column_force(int i) const {
    return k_column * (rest_upper - ps.pos[upper0 + i].z());
  }
  // Sensing-gap compression per taxel (the pressure readout), meters, >= 0.
  FloatGrid penetration() const;
  // Total upward reaction carried by the columns, newtons.
  double reaction() const;
  // Largest in-plane edge-length deviation of the movable sheets.
  double max_edge_residual() const;

  TriMesh mattress_mesh() const;  // deformed mattress top sheet
  TriMesh mat_mesh() const;       // deformed upper sensing sheet
};

}  // namespace bedsim
