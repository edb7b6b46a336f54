#include "bedsim/rest_sim.hpp"

#include "bedsim/heightfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bedsim {
namespace {

// Packed-parameter slice relaxed in phase 1: [theta(69), phi(3), trans(3)].
constexpr int kQ = kNumPoseAngles + 6;

struct CapsuleEnds {
  Vec3 p0, p1;
};

CapsuleEnds capsule_ends(const SkeletonPose& sp, const CapsuleDef& def,
                         const std::array<Vec3, kNumJoints>& j0) {
  CapsuleEnds e;
  e.p0 = sp.joints[def.joint_a];
  e.p1 = def.joint_b >= 0
             ? sp.joints[def.joint_b]
             : sp.frames[def.frame].apply(j0[def.joint_a] + def.end_offset);
  return e;
}

// Phase-1 potential over the weighted capsule chain: gravity on capsule
// midpoints plus a quadratic penalty for axis sample points whose capsule
// surface dips under the bed plane. Masses and radii are frozen at entry.
struct PoseEnergy {
  const BodyModel* model = nullptr;
  std::vector<double> radius, mass;
  std::array<Vec3, kNumJoints> j0{};
  double surface = 0.0;
  double penalty_k = 0.0;

  double value(const SkeletonPose& sp) const {
    const auto& defs = model->capsule_defs();
    double u = 0.0;
    for (size_t c = 0; c < defs.size(); ++c) {
      const CapsuleEnds e = capsule_ends(sp, defs[c], j0);
      u += mass[c] * kGravity * 0.5 * (e.p0.z() + e.p1.z());
      const double zs[3] = {e.p0.z(), 0.5 * (e.p0.z() + e.p1.z()), e.p1.z()};
      for (double z : zs) {
        const double d = surface - (z - radius[c]);
        if (d > 0.0) u += penalty_k * d * d;
      }
    }
    return u;
  }

  Eigen::Matrix<double, kQ, 1> gradient(const SkeletonPose& sp,
                                        const SkeletonJacobian& jac) const {
    const auto& defs = model->capsule_defs();
    Eigen::Matrix<double, kQ, 1> g = Eigen::Matrix<double, kQ, 1>::Zero();
    using Row = Eigen::Matrix<double, 1, kQ>;
    for (size_t c = 0; c < defs.size(); ++c) {
      const CapsuleDef& def = defs[c];
      const CapsuleEnds e = capsule_ends(sp, def, j0);
      const Row dz0 =
          jac.djoints.block<1, kQ>(3 * def.joint_a + 2, kNumShape);
      Row dz1;
      if (def.joint_b >= 0) {
        dz1 = jac.djoints.block<1, kQ>(3 * def.joint_b + 2, kNumShape);
      } else {
        const Vec3 v = j0[def.joint_a] + def.end_offset;
        const auto& df = jac.dframes[def.frame];
        // z row of d(R v + t): R rows are flattened row-major above t.
        dz1 = (v.x() * df.row(6) + v.y() * df.row(7) + v.z() * df.row(8) +
               df.row(11))
                  .segment<kQ>(kNumShape);
      }
      g += (mass[c] * kGravity * 0.5) * (dz0 + dz1).transpose();
      const double zs[3] = {e.p0.z(), 0.5 * (e.p0.z() + e.p1.z()), e.p1.z()};
      for (int s = 0; s < 3; ++s) {
        const double d = surface - (zs[s] - radius[c]);
        if (d <= 0.0) continue;
        const Row dz = s == 0 ? dz0 : (s == 1 ? Row(0.5 * (dz0 + dz1)) : dz1);
        g -= (2.0 * penalty_k * d) * dz.transpose();
      }
    }
    return g;
  }
};

double lowest_capsule_point(const BodyModel& model, const SkeletonPose& sp,
                            const std::array<Vec3, kNumJoints>& j0,
                            const std::vector<double>& radius) {
  const auto& defs = model.capsule_defs();
  double low = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < defs.size(); ++c) {
    const CapsuleEnds e = capsule_ends(sp, defs[c], j0);
    const double zmin =
        std::min({e.p0.z(), 0.5 * (e.p0.z() + e.p1.z()), e.p1.z()});
    low = std::min(low, zmin - radius[c]);
  }
  return low;
}

double max_step_change(const BodyParams& a, const BodyParams& b) {
  double m = (a.theta - b.theta).cwiseAbs().maxCoeff();
  m = std::max(m, (a.phi - b.phi).cwiseAbs().maxCoeff());
  return std::max(m, (a.trans - b.trans).cwiseAbs().maxCoeff());
}

bool lattice_in_bounds(const BedLattice& lat) {
  if (!lat.ps.all_finite()) return false;
  for (const auto& p : lat.ps.pos)
    if (p.z() < -1.0 || p.z() > 10.0 || std::abs(p.x()) > 5.0 ||
        std::abs(p.y()) > 5.0)
      return false;
  return true;
}

// Drops a rigid surface onto the bed lattice: bisects the drop depth until
// the sensing-layer reaction balances the weight. Fills the lattice outputs
// in `out` and returns the drop on success.
bool vertical_place(const TriMesh& lifted, double mass_kg,
                    const BedScene& scene, const SettleConfig& cfg,
                    RestState& out, double& drop) {
  const double mg = mass_kg * kGravity;
  BedLattice lat = BedLattice::build(scene);
  const std::vector<double> env0 = body_floor_envelope(lifted, scene);
  std::vector<double> env(env0.size());
  int total_sweeps = 0;

  auto finalize = [&]() {
    out.mattress = lat.mattress_mesh();
    out.mat = lat.mat_mesh();
    out.penetration = lat.penetration();
    out.relax_sweeps = total_sweeps;
  };
  auto evaluate = [&](double delta, double& reaction) {
    for (size_t i = 0; i < env0.size(); ++i)
      env[i] = std::isfinite(env0[i])
                   ? env0[i] - delta
                   : std::numeric_limits<double>::infinity();
    const int sweeps = lat.relax(env, cfg.eps_particle, cfg.max_relax_sweeps);
    if (sweeps < 0 || !lattice_in_bounds(lat)) return false;
    total_sweeps += sweeps;
    reaction = lat.reaction();
    return std::isfinite(reaction);
  };

  double r0 = 0.0;
  if (!evaluate(0.0, r0) || r0 >= mg) {
    finalize();
    return false;
  }
  double lo = 0.0, hi = 0.0;
  bool bracketed = false;
  for (int k = 1; k <= cfg.max_bracket_steps; ++k) {
    const double cand = 0.01 * k;
    double rc = 0.0;
    if (!evaluate(cand, rc)) {
      finalize();
      return false;
    }
    if (rc >= mg) {
      hi = cand;
      bracketed = true;
      break;
    }
    lo = cand;
  }
  if (!bracketed) {
    finalize();
    return false;
  }
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    double rm = 0.0;
    if (!evaluate(mid, rm)) {
      finalize();
      return false;
    }
    if (std::abs(rm - mg) / mg < cfg.force_tol) {
      drop = mid;
      finalize();
      return true;
    }
    (rm < mg ? lo : hi) = mid;
  }
  drop = 0.5 * (lo + hi);
  double rf = 0.0;
  const bool ok = evaluate(drop, rf);
  finalize();
  return ok;
}

}  // namespace

std::vector<double> body_floor_envelope(const TriMesh& mesh,
                                        const BedScene& scene) {
  constexpr int kSub = 4;
  const int rows = scene.taxel_rows * kSub, cols = scene.taxel_cols * kSub;
  const HeightField hf =
      rasterize_heightfield(mesh, rows, cols, 0.0, 0.0,
                            scene.taxel_dx() / kSub, scene.taxel_dy() / kSub);
  std::vector<double> env(static_cast<size_t>(scene.taxel_count()),
                          std::numeric_limits<double>::infinity());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (!hf.covered(r, c)) continue;
      const size_t t =
          static_cast<size_t>(r / kSub) * scene.taxel_cols + c / kSub;
      env[t] = std::min(env[t], hf.bottom[hf.idx(r, c)]);
    }
  return env;
}

std::vector<BodyParams> reference_poses(const BedScene& scene) {
  const auto ang = [](int joint, int axis) { return (joint - 1) * 3 + axis; };

  // The template's A-pose wingspan is wider than the bed, so every in-bed
  // reference adducts the arms to lie alongside the torso.
  BodyParams base;
  base.trans = Vec3(scene.width / 2.0, scene.length / 2.0 + 0.16,
                    scene.bed_surface() + 0.3);
  base.theta[ang(16, 2)] = -0.95;
  base.theta[ang(17, 2)] = 0.95;

  const auto bend_knees = [&](BodyParams& p) {
    p.theta[ang(1, 0)] = -0.45;
    p.theta[ang(2, 0)] = -0.45;
    p.theta[ang(4, 0)] = 0.9;
    p.theta[ang(5, 0)] = 0.9;
  };
  const auto spread_arms = [&](BodyParams& p) {
    p.theta[ang(16, 2)] = -0.75;
    p.theta[ang(17, 2)] = 0.75;
  };

  std::vector<BodyParams> out;
  out.push_back(base);  // flat supine, arms at the sides

  BodyParams p = base;  // knees raised
  bend_knees(p);
  out.push_back(p);

  p = base;  // arms angled away from the torso
  spread_arms(p);
  out.push_back(p);

  p = base;  // legs apart
  p.theta[ang(1, 2)] = 0.25;
  p.theta[ang(2, 2)] = -0.25;
  out.push_back(p);

  p = base;  // forearms turned inward, hands by the thighs
  p.theta[ang(18, 2)] = -0.35;
  p.theta[ang(19, 2)] = 0.35;
  out.push_back(p);

  p = base;  // knees raised + arms angled
  bend_knees(p);
  spread_arms(p);
  out.push_back(p);

  for (double side : {1.0, -1.0}) {  // +: lying on the left side
    BodyParams lat = base;
    lat.phi = Vec3(0.0, side * (std::numbers::pi / 2.0), 0.0);
    out.push_back(lat);  // straight lateral

    p = lat;  // loosely curled
    p.theta[ang(1, 0)] = -0.4;
    p.theta[ang(2, 0)] = -0.4;
    p.theta[ang(4, 0)] = 0.8;
    p.theta[ang(5, 0)] = 0.8;
    out.push_back(p);

    p = lat;  // tightly curled
    p.theta[ang(1, 0)] = -0.8;
    p.theta[ang(2, 0)] = -0.8;
    p.theta[ang(4, 0)] = 1.4;
    p.theta[ang(5, 0)] = 1.4;
    p.theta[ang(12, 0)] = -0.3;
    out.push_back(p);
  }
  return out;
}

std::optional<BodyParams> sample_initial_pose(const BodyModel& model,
                                              const BodyParams& reference,
                                              const BedScene& scene, Rng& rng,
                                              double noise_scale,
                                              int retry_limit, int* attempts) {
  static const int kNoisedJoints[] = {1, 2, 4, 5, 13, 14, 16, 17, 18, 19};
  const double sigma = (std::numbers::pi / 12.0) * noise_scale;

  for (int attempt = 1; attempt <= retry_limit; ++attempt) {
    if (attempts) *attempts = attempt;
    BodyParams p = reference;
    for (int i = 0; i < kNumShape; ++i) p.beta[i] = rng.uniform(-3.0, 3.0);
    for (int j : kNoisedJoints)
      for (int k = 0; k < 3; ++k)
        p.theta[(j - 1) * 3 + k] += rng.normal(0.0, sigma);
    p.phi.y() += rng.normal(0.0, sigma);
    p.phi.z() += rng.normal(0.0, sigma);
    p.trans.x() += rng.uniform(-0.2, 0.2);
    p.trans.y() += rng.uniform(-0.2, 0.2);

    const CapsuleChain chain = model.posed_capsules(p);
    if (model.check_self_collision(chain.capsules).collides) continue;

    const BodyMesh posed = model.pose(p);
    double low = std::numeric_limits<double>::infinity();
    for (const auto& v : posed.vertices) low = std::min(low, v.z());
    p.trans.z() += scene.bed_surface() + 1e-6 - low;
    return p;
  }
  return std::nullopt;
}

RestState settle(const BodyModel& model, const BodyParams& pose,
                 const BedScene& scene, const SettleConfig& config) {
  if (!pose.all_finite()) throw std::invalid_argument("non-finite body parameters");
  RestState out;
  out.params = pose;
  out.penetration =
      FloatGrid(scene.taxel_rows, scene.taxel_cols, GridKind::kPenetration);

  // Whole-body mass from the shaped rest mesh: pose-independent.
  const TriMesh rest_mesh{model.shaped_vertices(pose.beta, pose.gender),
                          model.faces()};
  out.body_mass = model.body_mass(mesh_volume(rest_mesh).volume, pose.gender);

  // Capsule masses and radii are frozen at the entry pose for phase 1.
  CapsuleChain chain = model.posed_capsules(pose);
  {
    const BodyMesh entry = model.pose(pose);
    const double live_volume = mesh_volume(entry.as_trimesh()).volume;
    model.capsule_masses(chain, live_volume, pose.gender);
  }
  PoseEnergy energy;
  energy.model = &model;
  energy.j0 = model.rest_joints(pose.beta, pose.gender);
  energy.surface = scene.bed_surface();
  energy.penalty_k = config.penalty_k;
  energy.radius.reserve(chain.capsules.size());
  for (const auto& c : chain.capsules) energy.radius.push_back(c.radius);
  energy.mass = chain.mass;

  BodyParams cur = pose;
  {
    // Touchdown: start with the capsule chain resting on the surface so the
    // descent spends its iterations on pose, not on free fall.
    const SkeletonPose sp = model.pose_skeleton(cur);
    const double low = lowest_capsule_point(model, sp, energy.j0, energy.radius);
    cur.trans.z() += scene.bed_surface() + 1e-3 - low;
  }

  SkeletonJacobian jac;
  SkeletonPose sp = model.pose_skeleton(cur, &jac);
  double u = energy.value(sp);
  out.energy.push_back(u);

  // Backtracking descent along the max-normalized gradient: eta is the
  // largest coordinate move per step, so the step size is meaningful across
  // the mixed radian/meter parameter block.
  double eta = 0.02;
  bool converged = false;
  int outer = 0;
  while (outer < config.max_pose_iters) {
    ++outer;
    Eigen::Matrix<double, kQ, 1> dir = energy.gradient(sp, jac);
    const double scale = dir.cwiseAbs().maxCoeff();
    if (scale < 1e-12 || !std::isfinite(scale)) {
      converged = true;
      break;
    }
    dir /= scale;
    BodyParams next;
    double u_next = 0.0;
    bool accepted = false;
    while (eta >= config.eps_pose) {
      next = cur;
      next.theta -= eta * dir.segment<kNumPoseAngles>(0);
      clamp_pose_angles(next.theta);
      next.phi -= eta * dir.segment<3>(kNumPoseAngles);
      next.trans -= eta * dir.segment<3>(kNumPoseAngles + 3);
      const SkeletonPose sp_next = model.pose_skeleton(next);
      u_next = energy.value(sp_next);
      if (std::isfinite(u_next) && u_next <= u) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      converged = true;  // no descent left above the pose tolerance
      break;
    }
    const double dq = max_step_change(next, cur);
    cur = next;
    u = u_next;
    out.energy.push_back(u);
    sp = model.pose_skeleton(cur, &jac);
    eta = std::min(eta * 1.3, 0.05);
    if (dq < config.eps_pose) {
      converged = true;
      break;
    }
  }
  out.pose_iters = outer;
  if (!converged) {
    const BodyMesh posed = model.pose(cur);
    out.params = cur;
    out.body = posed.as_trimesh();
    out.joints = posed.joints;
    out.stable = false;
    out.reject_reason = "sim-instability";
    return out;
  }

  // Phase 2: lift, then bisect the drop until the mat carries the weight.
  cur.trans.z() += config.redrop;
  const BodyMesh lifted = model.pose(cur);
  double drop = 0.0;
  if (!vertical_place(lifted.as_trimesh(), out.body_mass, scene, config, out,
                      drop)) {
    out.params = cur;
    out.body = lifted.as_trimesh();
    out.joints = lifted.joints;
    out.stable = false;
    out.reject_reason = "sim-instability";
    return out;
  }
  cur.trans.z() -= drop;
  const BodyMesh settled = model.pose(cur);
  out.params = cur;
  out.body = settled.as_trimesh();
  out.joints = settled.joints;
  out.drop_adjustment = config.redrop - drop;
  out.stable = true;
  return out;
}

RestState settle_rigid(const TriMesh& mesh, double mass_kg,
                       const BedScene& scene, const SettleConfig& config) {
  if (mesh.vertices.empty()) throw std::invalid_argument("empty mesh");
  if (!(mass_kg > 0.0)) throw std::invalid_argument("mass must be positive");
  RestState out;
  out.body_mass = mass_kg;
  out.penetration =
      FloatGrid(scene.taxel_rows, scene.taxel_cols, GridKind::kPenetration);

  double low = std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices) low = std::min(low, v.z());
  const double lift = scene.bed_surface() + config.redrop - low;
  TriMesh placed = mesh;
  placed.translate(Vec3(0.0, 0.0, lift));

  double drop = 0.0;
  if (!vertical_place(placed, mass_kg, scene, config, out, drop)) {
    out.body = placed;
    out.stable = false;
    out.reject_reason = "sim-instability";
    return out;
  }
  placed.translate(Vec3(0.0, 0.0, -drop));
  out.body = placed;
  out.drop_adjustment = lift - drop;
  out.stable = true;
  return out;
}

}  // namespace bedsim
