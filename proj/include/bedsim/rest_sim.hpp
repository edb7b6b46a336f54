#pragma once

#include "bedsim/body_model.hpp"
#include "bedsim/particles.hpp"
#include "bedsim/scene.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bedsim {

struct SettleConfig {
  double eps_pose = 1e-4;      // max parameter change per accepted step
  double eps_particle = 1e-5;  // lattice relax threshold, m
  int max_pose_iters = 4000;
  int max_relax_sweeps = 5000;
  int max_bracket_steps = 30;   // 1 cm drop expansions before giving up
  double redrop = 0.02;         // lift before the vertical placement, m
  double penalty_k = 1e4;       // surface penetration penalty, J/m^2
  double force_tol = 1e-3;      // |reaction - weight| / weight
};

// Result of settling a body (or a rigid probe mesh) onto the bed. The body
// surface and joints are in their final settled placement; `mattress` and
// `mat` are the deformed lattice sheets under it.
struct RestState {
  BodyParams params;
  TriMesh body;
  std::array<Vec3, kNumJoints> joints{};
  double body_mass = 0.0;  // kg, from the shaped rest mesh volume
  TriMesh mattress;
  TriMesh mat;
  FloatGrid penetration;     // kPenetration, m, per taxel
  bool stable = false;
  std::string reject_reason;   // set when !stable
  double drop_adjustment = 0.0;  // net change applied to trans.z by phase 2
  int pose_iters = 0;
  int relax_sweeps = 0;        // total lattice sweeps across phase 2
  std::vector<double> energy;  // phase-1 potential after each accepted step
};

// The built-in rest scenarios: supine and lateral variants with bent knees,
// spread arms/legs, and folded elbows, centered on the bed. All of them are
// self-collision free.
std::vector<BodyParams> reference_poses(const BedScene& scene);

// Draws a randomized initial pose around `reference`: normal noise with
// standard deviation (pi/12) * noise_scale on the limb/collar/shoulder
// angles and the flat rotations phi_2/phi_3, uniform shape in [-3, 3],
// uniform in-plane translation shift in [-0.2, 0.2], and trans.z chosen so
// the lowest surface point starts just above the bed. Redraws everything on
// self-collision up to retry_limit times; nullopt when all attempts collide.
// `attempts` (optional) receives the number of draws consumed.
std::optional<BodyParams> sample_initial_pose(const BodyModel& model,
                                              const BodyParams& reference,
                                              const BedScene& scene, Rng& rng,
                                              double noise_scale = 1.0,
                                              int retry_limit = 50,
                                              int* attempts = nullptr);

// Quasi-static settle: phase 1 relaxes pose/rotation/translation by
// backtracking gradient descent on gravitational potential plus a surface
// penetration penalty over the weighted capsule chain; phase 2 lifts the
// body, then finds the vertical placement where the mat reaction balances
// the body weight, relaxing the bed lattice at every trial drop.
RestState settle(const BodyModel& model, const BodyParams& pose,
                 const BedScene& scene, const SettleConfig& config = {});

// Phase-2-only settle of an arbitrary rigid mesh with the given mass; the
// returned state has default params/joints. Shares all vertical-placement
// machinery with the body path.
RestState settle_rigid(const TriMesh& mesh, double mass_kg,
                       const BedScene& scene, const SettleConfig& config = {});

// Per-taxel ceiling for the bed lattice: the lowest body surface point above
// each taxel (+inf where uncovered), from a 4x supersampled plan rasterization.
std::vector<double> body_floor_envelope(const TriMesh& mesh, const BedScene& scene);

}  // namespace bedsim
