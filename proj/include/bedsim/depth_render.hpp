#pragma once

#include "bedsim/grid.hpp"
#include "bedsim/mesh.hpp"
#include "bedsim/scene.hpp"

namespace bedsim {

// Z-buffer rasterization of the scene meshes into a depth image. Each pixel
// holds the smallest optical-axis distance of any surface covering the pixel
// center; pixels that hit nothing hold DepthGrid::kNoHit (0).
DepthGrid render_depth(const std::vector<const TriMesh*>& meshes, const Camera& cam);
DepthGrid render_depth(const std::vector<TriMesh>& meshes, const Camera& cam);

// Exact per-pixel ray/triangle intersection of the same scene; the
// rasterizer's test oracle (slow, O(pixels * faces)).
DepthGrid raycast_depth(const std::vector<const TriMesh*>& meshes, const Camera& cam);

// Training-time depth corruption. Stages run in order; a stage whose
// magnitude is zero is skipped, so the all-zero configuration is the
// identity (bitwise, no RNG consumed).
struct DepthNoiseParams {
  double shift_max = 0.05;   // global offset ~ U[-shift_max, shift_max], m
  double sag_max = 0.10;     // bed-sag parabola peak ~ U[0, sag_max], m
  double white_std = 0.002;  // per-pixel white noise, m
  double dropout = 0.01;     // per-pixel probability of losing the sample
  int max_patches = 2;       // rectangular synthetic occlusions, 0..max
  double patch_min = 0.05;   // patch side, fraction of image width
  double patch_max = 0.20;

  static DepthNoiseParams none() { return {0.0, 0.0, 0.0, 0.0, 0, 0.0, 0.0}; }
  bool is_identity() const {
    return shift_max == 0.0 && sag_max == 0.0 && white_std == 0.0 &&
           dropout == 0.0 && max_patches == 0;
  }
};

DepthGrid apply_noise(const DepthGrid& depth, const BedScene& scene,
                      const Camera& cam, Rng& rng, const DepthNoiseParams& p);

}  // namespace bedsim
