#pragma once

#include "bedsim/core.hpp"
#include "bedsim/grid.hpp"

namespace bedsim {

// Overhead pinhole camera looking straight down (-z). Image u grows with
// world +x, v with world +y; the depth value is the distance along the
// optical axis, i.e. camera height minus surface height.
struct Camera {
  int cols = 54;   // u extent (width, world x)
  int rows = 128;  // v extent (length, world y)
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;  // pixels
  Vec3 position = Vec3::Zero();                   // optical center, world
  double nominal_bed_distance = 1.6;              // b0, meters to bed surface

  // Projects a world point; returns false when at or behind the camera
  // plane. Z receives the depth along the optical axis.
  bool project(const Vec3& p, double& u, double& v, double& z) const {
    z = position.z() - p.z();
    if (z <= 1e-9) return false;
    u = cx + fx * (p.x() - position.x()) / z;
    v = cy + fy * (p.y() - position.y()) / z;
    return true;
  }

  // World (x, y) where the ray through pixel center (r, c) pierces the
  // horizontal plane at the given depth below the camera.
  Vec2 pixel_to_plane(int r, int c, double depth) const {
    const double u = c + 0.5, v = r + 0.5;
    return Vec2(position.x() + (u - cx) * depth / fx,
                position.y() + (v - cy) * depth / fy);
  }
};

// Bed geometry and mat-lattice material constants. World frame: origin at
// the bottom-left mattress corner, x across the bed (width), y along it
// (length), z up. The pressure mat is two particle layers on the mattress
// top sheet; the upper gap is the sensing gap whose compression is read out
// as pressure.
struct BedScene {
  double width = 0.99;   // s_M1, m
  double length = 2.03;  // s_M2, m
  int taxel_rows = 64;   // along y
  int taxel_cols = 27;   // along x

  double mattress_height = 0.18;  // rest z of the mattress top sheet
  double mat_gap_lower = 0.004;   // sheet -> lower mat layer
  double mat_gap_upper = 0.006;   // lower -> upper mat layer (sensing gap)

  // Spring constants (N/m per taxel column).
  double k_base = 400.0;   // mattress sheet -> frozen base
  double k_lower = 4000.0; // lower mat layer -> sheet
  double k_sense = 2000.0; // upper -> lower mat layer (read out as pressure)

  double kappa = 100.0;  // penetration -> pressure gain, kPa per meter

  double bed_surface() const {
    return mattress_height + mat_gap_lower + mat_gap_upper;
  }
  double taxel_dx() const { return width / taxel_cols; }
  double taxel_dy() const { return length / taxel_rows; }
  double taxel_area() const { return taxel_dx() * taxel_dy(); }
  int taxel_count() const { return taxel_rows * taxel_cols; }
  Vec2 taxel_center(int r, int c) const {
    return Vec2((c + 0.5) * taxel_dx(), (r + 0.5) * taxel_dy());
  }

  // Default overhead camera: centered over the bed at the nominal bed
  // distance, intrinsics chosen so the image footprint on the bed-surface
  // plane is exactly the mattress (depth rows/cols are integer multiples of
  // the taxel grid, keeping map pooling exact).
  Camera camera(int rows = 128, int cols = 54, double b0 = 1.6) const {
    Camera cam;
    cam.rows = rows;
    cam.cols = cols;
    cam.nominal_bed_distance = b0;
    cam.position = Vec3(width / 2.0, length / 2.0, bed_surface() + b0);
    cam.fx = cols * b0 / width;
    cam.fy = rows * b0 / length;
    cam.cx = cols / 2.0;
    cam.cy = rows / 2.0;
    return cam;
  }
};

}  // namespace bedsim
