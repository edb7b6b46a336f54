#include "bedsim/blanket_sim.hpp"

#include "bedsim/heightfield.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace bedsim {
namespace {

constexpr int kNeckJoint = 12;
constexpr int kHeadJoint = 15;

// Collision ceiling-from-below for the cloth: body + deformed mat rasterized
// over the mattress rectangle, slope-limited, sampled bilinearly. The bare
// surface height fills uncovered cells inside the rectangle and the whole
// plane outside it.
struct ClothFloor {
  int rows = 0, cols = 0;
  double x0 = 0.0, y0 = 0.0, dx = 1.0, dy = 1.0;
  std::vector<double> support;
  double surface = 0.0, offset = 0.0;
  double bed_w = 0.0, bed_l = 0.0;

  // Outside the bed rectangle the support plane simply continues at bed
  // height. A heightfield cannot hold the real vertical mattress face, and
  // every sloped substitute misbehaves: cloth links spanning a cliff are
  // forced far past rest length, steep ramps form free-hanging chains that
  // Gauss-Seidel cannot keep taut, and gentle ramps pull the whole sheet
  // into a permanent creep that velocity-level friction cannot hold back.
  // The overhang region lies entirely outside the camera footprint, so no
  // rendered output can tell the difference — the overhang just needs
  // somewhere neutral to rest.
  // Bilinear sampling between cell centers keeps the floor continuous; a
  // piecewise-constant lookup turns the body silhouette into stair-steps
  // whose phantom cliffs read back as huge vertical penetrations and fling
  // particles into a limit cycle.
  double at(double x, double y) const {
    if (x < 0.0 || x > bed_w || y < 0.0 || y > bed_l)
      return surface + offset;
    if (support.empty()) return surface + offset;
    const double u = (x - x0) / dx - 0.5;
    const double v = (y - y0) / dy - 0.5;
    const int c0 = static_cast<int>(std::floor(u));
    const int r0 = static_cast<int>(std::floor(v));
    const double fu = u - c0, fv = v - r0;
    const auto sample = [&](int r, int c) {
      r = std::clamp(r, 0, rows - 1);
      c = std::clamp(c, 0, cols - 1);
      return support[static_cast<size_t>(r) * cols + c];
    };
    const double z00 = sample(r0, c0), z01 = sample(r0, c0 + 1);
    const double z10 = sample(r0 + 1, c0), z11 = sample(r0 + 1, c0 + 1);
    const double z0 = z00 + (z01 - z00) * fu;
    const double z1 = z10 + (z11 - z10) * fu;
    return z0 + (z1 - z0) * fv + offset;
  }
};

// Replaces the support grid with the upper envelope of slope-bounded cones,
// i.e. support[i] = max_j (support[j] - slope * dist(i, j)). Two chamfer
// sweeps (forward and backward over the 8-neighbourhood) compute it exactly
// for the chamfer metric. Raw body silhouettes contain near-vertical walls
// — a foot is a ~6 cm wide, ~17 cm tall tower — and a particle sheet with
// ~16 mm links cannot wrap such a face: one link chords over the crest far
// past rest length while the collision floor forbids every position that
// would relax it. Real cloth cannot follow a knife edge either; bounding
// the slope makes the collider drape like fabric does, tenting off sharp
// features instead of vacuum-sealing them. Only ever raises cells, so the
// cloth stays at or above the true geometry.
void limit_slope(std::vector<double>& z, int rows, int cols, double dx,
                 double dy, double slope) {
  const double cx = slope * dx, cy = slope * dy;
  const double cd = slope * std::hypot(dx, dy);
  const auto id = [cols](int r, int c) {
    return static_cast<size_t>(r) * cols + c;
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double& v = z[id(r, c)];
      if (c > 0) v = std::max(v, z[id(r, c - 1)] - cx);
      if (r > 0) {
        v = std::max(v, z[id(r - 1, c)] - cy);
        if (c > 0) v = std::max(v, z[id(r - 1, c - 1)] - cd);
        if (c + 1 < cols) v = std::max(v, z[id(r - 1, c + 1)] - cd);
      }
    }
  for (int r = rows - 1; r >= 0; --r)
    for (int c = cols - 1; c >= 0; --c) {
      double& v = z[id(r, c)];
      if (c + 1 < cols) v = std::max(v, z[id(r, c + 1)] - cx);
      if (r + 1 < rows) {
        v = std::max(v, z[id(r + 1, c)] - cy);
        if (c + 1 < cols) v = std::max(v, z[id(r + 1, c + 1)] - cd);
        if (c > 0) v = std::max(v, z[id(r + 1, c - 1)] - cd);
      }
    }
}

ClothFloor build_floor(const RestState& rest, const BedScene& scene,
                       double offset) {
  ClothFloor floor;
  floor.surface = scene.bed_surface();
  floor.offset = offset;
  floor.bed_w = scene.width;
  floor.bed_l = scene.length;

  TriMesh combined = rest.body;
  const int base = static_cast<int>(combined.vertices.size());
  combined.vertices.insert(combined.vertices.end(), rest.mat.vertices.begin(),
                           rest.mat.vertices.end());
  for (const auto& f : rest.mat.faces)
    combined.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  if (combined.faces.empty()) return floor;

  constexpr int kSub = 4;
  constexpr double kMaxSlope = 1.2;  // ~50 degrees
  const HeightField hf = rasterize_heightfield(
      combined, scene.taxel_rows * kSub, scene.taxel_cols * kSub, 0.0, 0.0,
      scene.taxel_dx() / kSub, scene.taxel_dy() / kSub);
  floor.rows = hf.rows;
  floor.cols = hf.cols;
  floor.x0 = hf.x0;
  floor.y0 = hf.y0;
  floor.dx = hf.dx;
  floor.dy = hf.dy;
  floor.support.resize(hf.top.size());
  for (int r = 0; r < hf.rows; ++r)
    for (int c = 0; c < hf.cols; ++c)
      floor.support[hf.idx(r, c)] =
          hf.covered(r, c) ? hf.top[hf.idx(r, c)] : floor.surface;
  limit_slope(floor.support, floor.rows, floor.cols, floor.dx, floor.dy,
              kMaxSlope);
  return floor;
}

}  // namespace

BlanketConfig init_blanket(BlanketPartition partition,
                           const std::array<Vec3, kNumJoints>& joints,
                           const BedScene& scene, Rng& rng) {
  Vec3 lo = joints[0], hi = joints[0];
  for (const auto& j : joints) {
    lo = lo.cwiseMin(j);
    hi = hi.cwiseMax(j);
  }
  if ((hi - lo).maxCoeff() < 1e-9)
    throw std::invalid_argument("degenerate body: all joints coincide");

  const double neck_y = 0.5 * (joints[kNeckJoint].y() + joints[kHeadJoint].y());
  const double start_z = hi.z() + 0.30;

  BlanketConfig cfg;
  cfg.neckline_y = neck_y;
  // Longitudinal placement is expressed relative to the bed: the centered
  // sheet sits half a bed length below the neckline, so its own head-end
  // edge starts past the neckline and the adjustment pass drags it back.
  if (partition == BlanketPartition::kCentered) {
    cfg.translation =
        Vec3(0.5 * scene.width, neck_y - 0.5 * scene.length, start_z);
  } else {
    const double s1 = rng.uniform(lo.x(), hi.x());
    const double alpha = neck_y - 0.5 * scene.length - 0.4;
    const double half = 0.5 * (neck_y - lo.y());
    const double s2 = alpha + rng.uniform(-half, half);
    cfg.translation = Vec3(s1, s2, start_z);
  }
  return cfg;
}

DrapeResult drape_and_adjust(const BlanketConfig& cfg, const RestState& rest,
                             const BedScene& scene) {
  if (cfg.grid < 2) throw std::invalid_argument("blanket grid too small");
  DrapeResult res;
  const int n = cfg.grid;
  ParticleSystem& ps = res.cloth;
  ps.pos.reserve(static_cast<size_t>(n) * n);

  const double cell_x = cfg.width / (n - 1);
  const double cell_y = cfg.length / (n - 1);
  const double x00 = cfg.translation.x() - 0.5 * cfg.width;
  const double y00 = cfg.translation.y() - 0.5 * cfg.length;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      ps.add(Vec3(x00 + c * cell_x, y00 + r * cell_y, cfg.translation.z()),
             1.0);

  const auto at = [n](int r, int c) { return r * n + c; };
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (c + 1 < n) ps.link(at(r, c), at(r, c + 1), cfg.stretch_stiffness);
      if (r + 1 < n) ps.link(at(r, c), at(r + 1, c), cfg.stretch_stiffness);
    }
  for (int r = 0; r + 1 < n; ++r)
    for (int c = 0; c + 1 < n; ++c) {
      ps.link(at(r, c), at(r + 1, c + 1), cfg.shear_stiffness);
      ps.link(at(r, c + 1), at(r + 1, c), cfg.shear_stiffness);
    }
  const size_t audited_links = ps.constraints.size();  // stretch + shear
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (c + 2 < n) ps.link(at(r, c), at(r, c + 2), cfg.bend_stiffness);
      if (r + 2 < n) ps.link(at(r, c), at(r + 2, c), cfg.bend_stiffness);
    }

  const ClothFloor floor = build_floor(rest, scene, cfg.contact_offset);
  const double h = cfg.dt / cfg.substeps;

  // Contact resolution with position-based Coulomb friction. The push-out
  // follows the floor's surface normal, not +z: hoisting along +z on a
  // steep flank (body silhouette) would stretch the sheet instead of
  // letting it slide off and tent. Friction then compares the tangential
  // travel since substep start against mu times this iteration's normal
  // correction — particles at rest stick (a sheet draped over the body
  // must not slither off the hill), while corrections larger than the
  // friction cone keep sliding. Full stick is reserved for particles that
  // were already resting last substep: a fresh touchdown may slide freely
  // so the sheet can conform around bumps as it lays down, instead of
  // pinning flat-chord spacing that leaves the crest cloth-starved.
  constexpr double kGradStep = 8e-3;
  const auto floor_grad = [&](double x, double y) {
    return std::array<double, 2>{
        (floor.at(x + kGradStep, y) - floor.at(x - kGradStep, y)) /
            (2.0 * kGradStep),
        (floor.at(x, y + kGradStep) - floor.at(x, y - kGradStep)) /
            (2.0 * kGradStep)};
  };
  std::vector<uint8_t> resting(ps.size(), 0), touching(ps.size(), 0);
  const auto collide = [&](double mu) {
    for (size_t i = 0; i < ps.size(); ++i) {
      if (ps.inv_mass[i] == 0.0) continue;
      Vec3& p = ps.pos[i];
      const double pen_z = floor.at(p.x(), p.y()) - p.z();
      if (pen_z <= 0.0) continue;
      touching[i] = 1;
      const auto [gx, gy] = floor_grad(p.x(), p.y());
      const double denom = 1.0 + gx * gx + gy * gy;
      // Cap the push so a particle that wandered deep under a steep flank
      // climbs out over a few iterations instead of teleporting.
      constexpr double kMaxPush = 6e-3;
      double px = -pen_z * gx / denom;
      double py = -pen_z * gy / denom;
      double pz = pen_z / denom;
      const double plen = std::sqrt(px * px + py * py + pz * pz);
      if (plen > kMaxPush) {
        const double s = kMaxPush / plen;
        px *= s;
        py *= s;
        pz *= s;
      }
      p.x() += px;
      p.y() += py;
      p.z() += pz;
      // Inelastic contact: absorb the normal velocity so the lift does not
      // read back as a bounce on the next Verlet step.
      if (ps.prev[i].z() < p.z()) ps.prev[i].z() = p.z();
      const double tx = p.x() - ps.prev[i].x();
      const double ty = p.y() - ps.prev[i].y();
      const double t = std::hypot(tx, ty);
      const double cap = mu * pen_z / std::sqrt(denom);
      if (t <= cap && resting[i]) {
        p.x() = ps.prev[i].x();
        p.y() = ps.prev[i].y();
      } else if (cap > 0.0 && t > 0.0) {
        const double k = std::min(1.0, cap / t);
        p.x() -= tx * k;
        p.y() -= ty * k;
      }
    }
  };
  // Near-inextensible fabric: clamp any stretch/shear link stretched past
  // kStrainLimit by sliding its endpoints together, mass-weighted. Soft
  // projection alone transports length diffusively — one link per sweep —
  // far too slow to feed cloth over a body feature once friction has pinned
  // the surroundings; the hard clamp relays along a whole row in one sweep
  // and imports slack in from the free skirt. An endpoint resting on the
  // floor slides in the floor's tangent plane: pulling it straight along
  // the link would drive it into the hill the link spans, and the collision
  // response would eject it right back, re-stretching the link forever.
  constexpr double kStrainLimit = 0.015;
  const auto strain_sweep = [&]() {
    double worst = 0.0;
    const auto slide = [&](int i, const Vec3& step) {
      Vec3& p = ps.pos[i];
      Vec3 s = step;
      if (floor.at(p.x(), p.y()) - p.z() > -1e-4) {
        const auto [gx, gy] = floor_grad(p.x(), p.y());
        Vec3 nrm(-gx, -gy, 1.0);
        nrm /= nrm.norm();
        s -= nrm * nrm.dot(s);
      }
      p += s;
    };
    for (size_t k = 0; k < audited_links; ++k) {
      const auto& c = ps.constraints[k];
      const double wa = ps.inv_mass[c.a], wb = ps.inv_mass[c.b];
      const double wsum = wa + wb;
      if (wsum == 0.0) continue;
      const Vec3 d = ps.pos[c.b] - ps.pos[c.a];
      const double len = d.norm();
      if (len < 1e-12) continue;
      worst = std::max(worst, len / c.rest - 1.0);
      const double cap = c.rest * (1.0 + kStrainLimit);
      if (len <= cap) continue;
      const Vec3 corr = ((len - cap) / (wsum * len)) * d;
      if (wa != 0.0) slide(c.a, wa * corr);
      if (wb != 0.0) slide(c.b, -wb * corr);
    }
    return worst;
  };
  // Terminal-velocity cap: a sheet this light falls slowly through air, and
  // numerically an impact faster than about half a cell per substep snags
  // on the body and traps stretch that no later pass can transport out.
  const double v_max = 0.5 * std::min(cell_x, cell_y) / h;
  double mu_active = cfg.friction;
  bool dbg_substep = false;
  const auto dynamics_step = [&]() {
    for (int sub = 0; sub < cfg.substeps; ++sub) {
      for (size_t i = 0; i < ps.size(); ++i) {
        if (ps.inv_mass[i] == 0.0) continue;
        Vec3 v = (ps.pos[i] - ps.prev[i]) / h;
        v *= cfg.damping;
        v.z() -= kGravity * h;
        const double speed = v.norm();
        if (speed > v_max) v *= v_max / speed;
        ps.prev[i] = ps.pos[i];
        ps.pos[i] += v * h;
      }
      std::fill(touching.begin(), touching.end(), 0);
      for (int it = 0; it < cfg.iterations; ++it) {
        ps.project_once();
        collide(mu_active);
      }
      // Collision runs frictionless between strain sweeps: the friction
      // above established this substep's resting state, and the clamp must
      // stay free to slide cloth along the floor.
      if (dbg_substep) {
        double w = 0.0;
        for (size_t q = 0; q < audited_links; ++q) {
          const auto& cc = ps.constraints[q];
          w = std::max(w, (ps.pos[cc.b] - ps.pos[cc.a]).norm() / cc.rest - 1);
        }
        std::fprintf(stderr, "  [sub] post-iter worst=%.4f\n", w);
      }
      for (int s = 0; s < 8; ++s) {
        const double stretch = strain_sweep();
        collide(0.0);
        if (dbg_substep)
          std::fprintf(stderr, "  [sub] sweep %d pre-stretch=%.4f\n", s,
                       stretch);
        if (stretch <= kStrainLimit + 0.005) break;
      }
      if (dbg_substep) {
        double w = 0.0;
        for (size_t q = 0; q < audited_links; ++q) {
          const auto& cc = ps.constraints[q];
          w = std::max(w, (ps.pos[cc.b] - ps.pos[cc.a]).norm() / cc.rest - 1);
        }
        std::fprintf(stderr, "  [sub] post-strain worst=%.4f\n", w);
      }
      std::swap(resting, touching);
    }
  };
  // Runs dynamics until the largest per-step move drops under settle_eps;
  // returns false when the step budget runs out first.
  std::vector<Vec3> before(ps.size());
  const auto settle_cloth = [&](int budget) {
    for (int step = 0; step < budget; ++step) {
      before = ps.pos;
      dynamics_step();
      ++res.steps;
      double moved = 0.0;
      for (size_t i = 0; i < ps.size(); ++i)
        moved = std::max(moved, (ps.pos[i] - before[i]).norm());
      res.move_trace.push_back(static_cast<float>(moved));
      if (step % 10 == 0) {
        double worst = 0.0;
        size_t wq = 0;
        for (size_t q = 0; q < audited_links; ++q) {
          const auto& cc = ps.constraints[q];
          const double len = (ps.pos[cc.b] - ps.pos[cc.a]).norm();
          const double r = std::abs(len - cc.rest) / cc.rest;
          if (r > worst) {
            worst = r;
            wq = q;
          }
        }
        const auto& cc = ps.constraints[wq];
        const Vec3& A = ps.pos[cc.a];
        const Vec3& B = ps.pos[cc.b];
        std::fprintf(stderr,
                     "[settle] step=%d moved=%.3e resid=%.4f a=%d(%.3f,%.3f,"
                     "%.3f) b=%d(%.3f,%.3f,%.3f) floorA=%.3f floorB=%.3f\n",
                     step, moved, worst, cc.a, A.x(), A.y(), A.z(), cc.b,
                     B.x(), B.y(), B.z(), floor.at(A.x(), A.y()),
                     floor.at(B.x(), B.y()));
      }
      if (moved < cfg.settle_eps) return true;
    }
    return false;
  };

  // The drape settles in two friction phases. Lay-down runs nearly
  // frictionless: the sheet conforms around body features while slack still
  // flows freely, so no impact stretch gets pinned where it landed. Full
  // friction then locks the settled shape for the neckline adjustment —
  // without it the kinematic pull would drag the whole sheet instead of
  // re-draping the head end.
  mu_active = 0.05;
  bool ok = settle_cloth(cfg.max_steps);
  mu_active = cfg.friction;
  ok = ok && settle_cloth(cfg.max_steps);

  // Neckline adjustment: drag the head-end edge row kinematically, in
  // pull_step increments with short re-relaxations between, until it sits in
  // the neckline band — downward when the drape left it past the neckline
  // (uncovering the head), upward when it landed far below (covering more of
  // the person). The edge row stays frozen afterwards so the settled sheet
  // keeps the adjusted line.
  if (ok && std::isfinite(cfg.neckline_y)) {
    double mean_y = 0.0;
    for (int c = 0; c < n; ++c) mean_y += ps.pos[at(n - 1, c)].y();
    mean_y /= n;
    if (std::abs(mean_y - cfg.neckline_y) > 0.5 * cfg.pull_step) {
      for (int c = 0; c < n; ++c) ps.freeze(at(n - 1, c));
      while (res.pull_increments < cfg.max_pull_increments &&
             std::abs(mean_y - cfg.neckline_y) > 0.5 * cfg.pull_step) {
        const double shift = std::clamp(cfg.neckline_y - mean_y,
                                        -cfg.pull_step, cfg.pull_step);
        for (int c = 0; c < n; ++c) {
          ps.pos[at(n - 1, c)].y() += shift;
          ps.prev[at(n - 1, c)].y() += shift;
        }
        mean_y += shift;
        ++res.pull_increments;
        for (int s = 0; s < cfg.pull_relax_steps; ++s) {
          dynamics_step();
          ++res.steps;
        }
      }
      ok = std::abs(mean_y - cfg.neckline_y) <= cfg.pull_step &&
           settle_cloth(cfg.max_steps);
    }
  }

  // Quasi-static polish: with the drape settled, iterate pure constraint
  // projection against the floor (no gravity, no inertia, no friction — it
  // would pin the very stretch this pass is meant to drain) to remove the
  // residual link violations left by the dynamic phase. The shape only
  // moves at the millimeter scale this far into the settle.
  if (ok) {
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int k = 0; k < 500 && since_best < 40; ++k) {
      const double moved = ps.project_once();
      collide(0.0);
      strain_sweep();
      collide(0.0);
      if (moved < 1e-6) break;
      if (moved < 0.9 * best) {
        best = moved;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
  }

  res.converged = ok && ps.all_finite();
  for (size_t k = 0; k < audited_links; ++k) {
    const auto& c = ps.constraints[k];
    const double len = (ps.pos[c.b] - ps.pos[c.a]).norm();
    res.max_edge_residual =
        std::max(res.max_edge_residual, std::abs(len - c.rest) / c.rest);
  }
  res.blanket = sheet_mesh(n, n, ps.pos);
  return res;
}

}  // namespace bedsim
