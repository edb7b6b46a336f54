#include "bedsim/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace bedsim {

namespace {

constexpr int kTaxels = 1728;  // 64 x 27

void require_map(const FloatGrid& g, const char* what) {
  if (g.rows * g.cols != kTaxels)
    throw std::invalid_argument(std::string(what) + ": expected a 64x27 grid");
}

void require_same_shape(const FloatGrid& a, const FloatGrid& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

double grid_l1(const FloatGrid& a, const FloatGrid& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    s += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
  return s;
}

double grid_l2sq(const FloatGrid& a, const FloatGrid& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

void LossNormalizers::validate() const {
  const double all[] = {sigma_beta,     sigma_theta,
                        sigma_rot,      sigma_joint,
                        sigma_b,        sigma_vertex,
                        sigma_sink,     sigma_sink_contact,
                        sigma_pressure, sigma_pressure_contact,
                        sigma_depth,    sigma_depth_contact};
  for (double s : all)
    if (!(s > 0.0)) throw std::invalid_argument("loss normalizers must be > 0");
}

ParamsInstance make_instance(const BodyParams& params,
                             const std::array<Vec3, kNumJoints>& joints) {
  ParamsInstance inst;
  inst.beta = params.beta;
  inst.theta = params.theta;
  inst.phi = params.phi;
  inst.joints = joints;
  inst.cam_to_bed = params.cam_to_bed;
  return inst;
}

double mpjpe_mm(const std::array<Vec3, kNumJoints>& a,
                const std::array<Vec3, kNumJoints>& b) {
  double s = 0.0;
  for (int j = 0; j < kNumJoints; ++j) s += (a[j] - b[j]).norm();
  return 1000.0 * s / kNumJoints;
}

double mpjpe_mm(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.size() != static_cast<size_t>(kNumJoints) || a.size() != b.size())
    throw std::invalid_argument("mpjpe: expected two sets of 24 joints");
  double s = 0.0;
  for (size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]).norm();
  return 1000.0 * s / static_cast<double>(a.size());
}

double loss_params(const ParamsInstance& pred, const ParamsInstance& gt,
                   const LossNormalizers& n) {
  n.validate();
  double loss = 0.0;
  loss += (pred.beta - gt.beta).cwiseAbs().sum() / (kNumShape * n.sigma_beta);
  loss += (pred.theta - gt.theta).cwiseAbs().sum() / (kNumPoseAngles * n.sigma_theta);
  double rot = 0.0;
  for (int u = 0; u < 3; ++u) {
    rot += std::abs(std::cos(pred.phi[u]) - std::cos(gt.phi[u]));
    rot += std::abs(std::sin(pred.phi[u]) - std::sin(gt.phi[u]));
  }
  loss += rot / (6.0 * n.sigma_rot);
  double joints = 0.0;
  for (int j = 0; j < kNumJoints; ++j) joints += (pred.joints[j] - gt.joints[j]).norm();
  loss += joints / (kNumJoints * n.sigma_joint);
  if (pred.cam_to_bed && gt.cam_to_bed)
    loss += std::abs(*pred.cam_to_bed - *gt.cam_to_bed) / n.sigma_b;
  return loss;
}

double loss_vertex(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                   const LossNormalizers& n) {
  n.validate();
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("loss_vertex: vertex count mismatch");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) s += (pred[i] - gt[i]).norm();
  return s / (static_cast<double>(pred.size()) * n.sigma_vertex);
}

double loss_sink_map(const FloatGrid& pred, const FloatGrid& gt,
                     const FloatGrid& pred_contact, const FloatGrid& gt_contact,
                     const LossNormalizers& n) {
  n.validate();
  require_map(pred, "loss_sink_map");
  require_same_shape(pred, gt, "loss_sink_map");
  require_same_shape(pred_contact, gt_contact, "loss_sink_map contact");
  require_map(pred_contact, "loss_sink_map contact");
  return grid_l2sq(pred, gt) / (kTaxels * n.sigma_sink) +
         grid_l1(pred_contact, gt_contact) / (kTaxels * n.sigma_sink_contact);
}

double loss_pressure(const FloatGrid& pred, const FloatGrid& gt,
                     const FloatGrid& pred_contact, const FloatGrid& gt_contact,
                     const LossNormalizers& n) {
  n.validate();
  require_map(pred, "loss_pressure");
  require_same_shape(pred, gt, "loss_pressure");
  require_same_shape(pred_contact, gt_contact, "loss_pressure contact");
  require_map(pred_contact, "loss_pressure contact");
  return grid_l1(pred, gt) / (kTaxels * n.sigma_pressure) +
         grid_l1(pred_contact, gt_contact) / (kTaxels * n.sigma_pressure_contact);
}

double loss_depth_map(const FloatGrid& pred, const FloatGrid& gt,
                      const FloatGrid& pred_contact, const FloatGrid& gt_contact,
                      const LossNormalizers& n) {
  n.validate();
  require_map(pred, "loss_depth_map");
  require_same_shape(pred, gt, "loss_depth_map");
  require_same_shape(pred_contact, gt_contact, "loss_depth_map contact");
  require_map(pred_contact, "loss_depth_map contact");
  return grid_l2sq(pred, gt) / (kTaxels * n.sigma_depth) +
         grid_l1(pred_contact, gt_contact) / (kTaxels * n.sigma_depth_contact);
}

double pressure_mse(const PressureGrid& a, const PressureGrid& b) {
  require_same_shape(a.grid, b.grid, "pressure_mse");
  if (a.grid.size() == 0) throw std::invalid_argument("pressure_mse: empty grid");
  return grid_l2sq(a.grid, b.grid) / static_cast<double>(a.grid.size());
}

double std_dev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace bedsim
