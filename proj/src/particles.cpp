#include "bedsim/particles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bedsim {

int ParticleSystem::add(const Vec3& p, double inv_m) {
  pos.push_back(p);
  prev.push_back(p);
  inv_mass.push_back(inv_m);
  frozen.push_back(inv_m == 0.0 ? 1 : 0);
  return static_cast<int>(pos.size()) - 1;
}

void ParticleSystem::freeze(int i) {
  inv_mass[i] = 0.0;
  frozen[i] = 1;
}

void ParticleSystem::link(int a, int b, double stiffness) {
  DistanceConstraint c;
  c.a = a;
  c.b = b;
  c.rest = (pos[b] - pos[a]).norm();
  c.stiffness = stiffness;
  constraints.push_back(c);
}

double ParticleSystem::project_once() {
  double max_move = 0.0;
  for (const auto& c : constraints) {
    const double wa = inv_mass[c.a], wb = inv_mass[c.b];
    const double wsum = wa + wb;
    if (wsum == 0.0) continue;
    const Vec3 d = pos[c.b] - pos[c.a];
    const double len = d.norm();
    if (len < 1e-12) continue;
    const Vec3 corr = (c.stiffness * (c.rest - len) / (wsum * len)) * d;
    if (wa != 0.0) {
      pos[c.a] -= wa * corr;
      max_move = std::max(max_move, wa * corr.norm());
    }
    if (wb != 0.0) {
      pos[c.b] += wb * corr;
      max_move = std::max(max_move, wb * corr.norm());
    }
  }
  return max_move;
}

double ParticleSystem::max_link_residual() const {
  double worst = 0.0;
  for (const auto& c : constraints) {
    const double len = (pos[c.b] - pos[c.a]).norm();
    worst = std::max(worst, std::abs(len - c.rest) / c.rest);
  }
  return worst;
}

bool ParticleSystem::all_finite() const {
  for (const auto& p : pos)
    if (!p.allFinite()) return false;
  return true;
}

BedLattice BedLattice::build(const BedScene& scene) {
  BedLattice lat;
  lat.rows = scene.taxel_rows;
  lat.cols = scene.taxel_cols;
  lat.k_base = scene.k_base;
  lat.k_lower = scene.k_lower;
  lat.k_sense = scene.k_sense;
  // One taxel column is three springs in series.
  lat.k_column =
      1.0 / (1.0 / lat.k_base + 1.0 / lat.k_lower + 1.0 / lat.k_sense);
  // Neighbor coupling of the top sheet; the ratio to the column stiffness
  // sets how far a dent bleeds sideways (a few taxels here), which keeps
  // the sheet smooth enough that in-plane edges stretch well under 2%.
  lat.k_shear = 10.0 * lat.k_column;

  lat.rest_mattress = scene.mattress_height;
  lat.rest_lower = lat.rest_mattress + scene.mat_gap_lower;
  lat.rest_upper = lat.rest_lower + scene.mat_gap_upper;

  auto add_layer = [&](double z, double inv_m) {
    const int first = static_cast<int>(lat.ps.size());
    for (int r = 0; r < lat.rows; ++r)
      for (int c = 0; c < lat.cols; ++c) {
        const Vec2 xy = scene.taxel_center(r, c);
        lat.ps.add(Vec3(xy.x(), xy.y(), z), inv_m);
      }
    return first;
  };
  lat.base0 = add_layer(0.0, 0.0);
  lat.mattress0 = add_layer(lat.rest_mattress, 1.0);
  lat.lower0 = add_layer(lat.rest_lower, 1.0);
  lat.upper0 = add_layer(lat.rest_upper, 1.0);
  return lat;
}

int BedLattice::relax(const std::vector<double>& ceiling, double eps,
                      int max_sweeps) {
  const int n = rows * cols;
  if (static_cast<int>(ceiling.size()) != n)
    throw std::invalid_argument("ceiling size mismatch");

  // Projected Gauss-Seidel on the top-sheet heights: each visit solves one
  // column force balance against its shear neighbors exactly, then clamps
  // to the body ceiling. Symmetric sweep order keeps the relaxed sheet free
  // of directional bias. The sheet can never rise above its rest plane.
  auto visit = [&](int i, int r, int c) {
    double s = 0.0;
    int deg = 0;
    if (c > 0) s += ps.pos[upper0 + i - 1].z(), ++deg;
    if (c + 1 < cols) s += ps.pos[upper0 + i + 1].z(), ++deg;
    if (r > 0) s += ps.pos[upper0 + i - cols].z(), ++deg;
    if (r + 1 < rows) s += ps.pos[upper0 + i + cols].z(), ++deg;
    double z = (k_column * rest_upper + k_shear * s) /
               (k_column + k_shear * deg);
    z = std::min(z, std::min(ceiling[i], rest_upper));
    double& slot = ps.pos[upper0 + i].z();
    const double move = std::abs(z - slot);
    slot = z;
    return move;
  };

  int sweeps = -1;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_move = 0.0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        max_move = std::max(max_move, visit(r * cols + c, r, c));
    for (int r = rows - 1; r >= 0; --r)
      for (int c = cols - 1; c >= 0; --c)
        max_move = std::max(max_move, visit(r * cols + c, r, c));
    if (max_move < eps) {
      sweeps = sweep + 1;
      break;
    }
  }
  if (sweeps < 0) return -1;

  for (int i = 0; i < n; ++i) {
    double& z_up = ps.pos[upper0 + i].z();
    // Snap float-noise-level compression back to exact rest so an untouched
    // column reads exactly zero.
    if (rest_upper - z_up < 1e-12) z_up = rest_upper;
    // The same force flows through every spring of the column; reconstruct
    // the inner layers from it.
    const double f = k_column * (rest_upper - z_up);
    ps.pos[mattress0 + i].z() = rest_mattress - f / k_base;
    ps.pos[lower0 + i].z() =
        std::min(z_up, rest_lower - f * (1.0 / k_base + 1.0 / k_lower));
  }
  return sweeps;
}

FloatGrid BedLattice::penetration() const {
  FloatGrid out(rows, cols, GridKind::kPenetration);
  for (int i = 0; i < rows * cols; ++i)
    out.data[i] =
        static_cast<float>(std::max(0.0, column_force(i) / k_sense));
  return out;
}

double BedLattice::reaction() const {
  double total = 0.0;
  for (int i = 0; i < rows * cols; ++i)
    total += std::max(0.0, column_force(i));
  return total;
}

double BedLattice::max_edge_residual() const {
  double worst = 0.0;
  for (int first : {mattress0, lower0, upper0}) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const int i = first + r * cols + c;
        if (c + 1 < cols) {
          const double rest = ps.pos[i + 1].x() - ps.pos[i].x();
          const double dz = ps.pos[i + 1].z() - ps.pos[i].z();
          worst = std::max(worst, std::hypot(rest, dz) / rest - 1.0);
        }
        if (r + 1 < rows) {
          const double rest = ps.pos[i + cols].y() - ps.pos[i].y();
          const double dz = ps.pos[i + cols].z() - ps.pos[i].z();
          worst = std::max(worst, std::hypot(rest, dz) / rest - 1.0);
        }
      }
  }
  return worst;
}

TriMesh BedLattice::mattress_mesh() const {
  std::vector<Vec3> verts(ps.pos.begin() + mattress0,
                          ps.pos.begin() + mattress0 + rows * cols);
  return sheet_mesh(rows, cols, verts);
}

TriMesh BedLattice::mat_mesh() const {
  std::vector<Vec3> verts(ps.pos.begin() + upper0,
                          ps.pos.begin() + upper0 + rows * cols);
  return sheet_mesh(rows, cols, verts);
}

}  // namespace bedsim
