#pragma once

#include "bedsim/particles.hpp"
#include "bedsim/rest_sim.hpp"

#include <limits>

namespace bedsim {

// Blanket placement + cloth solver knobs. The translation is the blanket
// CENTER in world coordinates; z is the flat start height. neckline_y is the
// post-drape pull target for the head-end edge (NaN disables the pull).
struct BlanketConfig {
  double width = 1.68;   // across the bed, m
  double length = 2.29;  // along the bed, m
  int grid = 102;        // particles per side
  Vec3 translation = Vec3::Zero();
  double neckline_y = std::numeric_limits<double>::quiet_NaN();

  double stretch_stiffness = 0.9;
  double shear_stiffness = 0.9;
  double bend_stiffness = 0.3;

  double contact_offset = 0.003;  // cloth thickness over the envelope, m
  double friction = 0.4;          // tangential damping on contact
  double dt = 1.0 / 30.0;
  int substeps = 2;
  int iterations = 4;  // constraint sweeps per substep
  double damping = 0.9;
  double settle_eps = 2.5e-4;  // max particle move per step when at rest, m
  int max_steps = 800;
  double pull_step = 0.01;  // kinematic edge increment, m
  int max_pull_increments = 60;
  int pull_relax_steps = 6;  // dynamics steps between increments
};

// How the blanket is placed over the settled body.
enum class BlanketPartition {
  kCentered,  // laterally centered, head edge near the neckline
  kRandom,    // uniform over the joint extent / chest band
};

// Appendix-style placement from the settled joints. Centered draws nothing
// from rng; random consumes exactly two uniforms (lateral, longitudinal).
// Throws std::invalid_argument when all joints coincide.
BlanketConfig init_blanket(BlanketPartition partition,
                           const std::array<Vec3, kNumJoints>& joints,
                           const BedScene& scene, Rng& rng);

struct DrapeResult {
  bool converged = false;
  TriMesh blanket;            // grid x grid sheet at the final state
  int steps = 0;              // dynamics steps consumed
  int pull_increments = 0;    // neckline adjustment increments applied
  double max_edge_residual = 0.0;  // over stretch + shear links
  ParticleSystem cloth;       // final particle state, for audits
  std::vector<float> move_trace;   // max particle move per dynamics step
};

// Drops the flat blanket onto the settled scene (body + deformed mat from
// `rest`; both may be empty for a bare bed), relaxes it to rest, then pulls
// the head-end edge down to the neckline when it covers past it. The pulled
// edge row is kinematic from the first increment on.
DrapeResult drape_and_adjust(const BlanketConfig& config, const RestState& rest,
                             const BedScene& scene);

}  // namespace bedsim
