#pragma once

#include "bedsim/grid.hpp"
#include "bedsim/heightfield.hpp"
#include "bedsim/mesh.hpp"
#include "bedsim/scene.hpp"

#include <utility>
#include <vector>

namespace bedsim {

// One sparse derivative entry of a taxel value with respect to the vertical
// coordinate of one mesh vertex.
struct ReconGrad {
  int taxel = 0;   // row-major taxel index
  int vertex = 0;  // mesh vertex index
  double coeff = 0.0;
};

// Taxel-resolution reconstruction map with a companion binary contact map and
// the sparse analytic derivative of each taxel value w.r.t. vertex heights.
// Values are kept in double; to_grid() converts for serialization.
struct ReconMap {
  int rows = 0;
  int cols = 0;
  GridKind kind = GridKind::kDepthRecon;
  std::vector<double> value;      // rows*cols, meters, >= 0
  FloatGrid contact;              // kContact, 1 = active taxel
  std::vector<ReconGrad> dvertex_z;

  double at(int r, int c) const { return value[static_cast<size_t>(r) * cols + c]; }
  FloatGrid to_grid() const;
};

// Distance from the camera plane to the topmost body surface over each taxel
// footprint. The surface is rasterized top-down at `subdiv`x taxel resolution
// and max-pooled; taxels the body does not cover are 0 with contact 0.
// Derivatives are taken w.r.t. vertex z only (in-plane motion of the winning
// triangle is not differentiated through).
ReconMap depth_recon(const TriMesh& mesh, const Camera& cam, const BedScene& scene,
                     int subdiv = 4);

// How far the body surface sinks below the bed surface over each taxel:
// max(0, surface_z - lowest body z), where surface_z = camera_z - b. Taxels
// with no sink are 0 with contact 0; clamped taxels carry no derivative.
ReconMap sink_recon(const TriMesh& mesh, double b, const BedScene& scene,
                    const Camera& cam, int subdiv = 4);
ReconMap sink_recon(const TriMesh& mesh, double b, const BedScene& scene,
                    int subdiv = 4);

// Affine pressure calibrator over the feature stack
// {sink value, x/cols, y/rows, 1} shared by every taxel.
struct PressureCal {
  Eigen::Matrix<double, 4, 1> coeff = Eigen::Matrix<double, 4, 1>::Zero();
  double train_mse = 0.0;  // post-clamp mean squared error on the fit set
};

// Least-squares fit of the affine model on (sink map, target pressure grid)
// pairs. Requires >= 4 pairs and a full-rank feature system; throws otherwise.
PressureCal cal_fit(const std::vector<std::pair<ReconMap, FloatGrid>>& pairs);

// Applies the calibrator and clamps negatives to zero.
PressureGrid cal_apply(const PressureCal& model, const ReconMap& p_plus,
                       const BedScene& scene = BedScene{});

}  // namespace bedsim
