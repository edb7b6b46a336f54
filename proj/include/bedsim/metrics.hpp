#pragma once

#include "bedsim/body_model.hpp"
#include "bedsim/grid.hpp"

#include <optional>

namespace bedsim {

// Dataset-derived standard deviations for the loss formulas. Defaults of 1
// make every loss a plain (normalized-count) norm; pipelines overwrite them
// with statistics of the generated dataset.
struct LossNormalizers {
  double sigma_beta = 1.0;
  double sigma_theta = 1.0;
  double sigma_rot = 1.0;            // cos/sin global-rotation pairs
  double sigma_joint = 1.0;          // per-joint 3D position term
  double sigma_b = 1.0;              // camera-to-bed distance
  double sigma_vertex = 1.0;
  double sigma_sink = 1.0;           // sink-depth reconstruction map
  double sigma_sink_contact = 1.0;
  double sigma_pressure = 1.0;       // calibrated pressure image
  double sigma_pressure_contact = 1.0;
  double sigma_depth = 1.0;          // depth reconstruction map
  double sigma_depth_contact = 1.0;

  void validate() const;  // throws unless every sigma > 0
};

// One comparable instance of the fitter/encoder target parameterization.
// The global rotation enters the parameter loss through a continuous
// (cos, sin) pair per axis; joints are 3D positions in meters.
struct ParamsInstance {
  Eigen::Matrix<double, kNumShape, 1> beta =
      Eigen::Matrix<double, kNumShape, 1>::Zero();
  Eigen::Matrix<double, kNumPoseAngles, 1> theta =
      Eigen::Matrix<double, kNumPoseAngles, 1>::Zero();
  Vec3 phi = Vec3::Zero();
  std::array<Vec3, kNumJoints> joints{};
  std::optional<double> cam_to_bed;
};

ParamsInstance make_instance(const BodyParams& params,
                             const std::array<Vec3, kNumJoints>& joints);

// Mean per-joint position error in millimeters.
double mpjpe_mm(const std::array<Vec3, kNumJoints>& a,
                const std::array<Vec3, kNumJoints>& b);
// Size-checked overload; throws on length mismatch.
double mpjpe_mm(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Parameter-space loss: L1 over beta (count-normalized), L1 over joint
// angles, L1 over the six global-rotation (cos, sin) values, mean per-joint
// Euclidean distance, and (when both sides carry it) L1 over the
// camera-to-bed distance, each divided by its normalizer.
double loss_params(const ParamsInstance& pred, const ParamsInstance& gt,
                   const LossNormalizers& n);

// Mean (count- and sigma-normalized) per-vertex Euclidean distance.
double loss_vertex(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                   const LossNormalizers& n);

// Map losses over the 64x27 reconstruction grids (T = 1728 taxels):
//   sink/depth maps: squared-L2 value term + L1 contact term;
//   pressure image:  L1 value term + L1 contact term.
double loss_sink_map(const FloatGrid& pred, const FloatGrid& gt,
                     const FloatGrid& pred_contact, const FloatGrid& gt_contact,
                     const LossNormalizers& n);
double loss_pressure(const FloatGrid& pred, const FloatGrid& gt,
                     const FloatGrid& pred_contact, const FloatGrid& gt_contact,
                     const LossNormalizers& n);
double loss_depth_map(const FloatGrid& pred, const FloatGrid& gt,
                      const FloatGrid& pred_contact, const FloatGrid& gt_contact,
                      const LossNormalizers& n);

// Per-taxel mean squared error between two same-shape pressure grids, kPa^2.
double pressure_mse(const PressureGrid& a, const PressureGrid& b);

// Sample standard deviation (n-1 denominator; n < 2 -> 0).
double std_dev(const std::vector<double>& values);

}  // namespace bedsim
