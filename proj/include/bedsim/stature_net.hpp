#pragma once

#include "bedsim/body_model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace bedsim {

// One training pair: raw input [beta(10), gender(2)] and its labels.
struct StatureSample {
  Eigen::Matrix<double, 12, 1> input;
  double height = 0.0;  // m
  double mass = 0.0;    // kg
};

struct StatureDataset {
  std::vector<StatureSample> samples;
  uint64_t seed = 0;
};

// Ground-truth labels for one body: rest-template long-axis extent and the
// volume-ratio body mass.
std::pair<double, double> stature_labels(
    const BodyModel& model, const Eigen::Matrix<double, kNumShape, 1>& beta,
    const GenderFlags& gender);

// Synthetic supervision set: beta ~ U[-3,3]^10, gender uniform over
// {male, female, neutral}; deterministic for a fixed seed.
StatureDataset generate_stature_dataset(const BodyModel& model, int n,
                                        uint64_t seed);

// Per-sample label loss: |h - h_hat|/sigma_h + |m - m_hat|/sigma_m.
double stature_loss(double h, double m, double h_hat, double m_hat,
                    double sigma_h, double sigma_m);

// Two-layer (12 -> hidden -> 2, tanh) regressor trained with ADAM on the
// sigma-normalized L1 label loss. Inputs and targets are standardized
// internally; the stored sigmas are the dataset label deviations.
class StatureNet {
 public:
  struct TrainConfig {
    int hidden = 64;
    int epochs = 500;
    double lr = 1e-4;
    double weight_decay = 5e-4;
    int batch = 128;
    uint64_t seed = 1;
  };

  static StatureNet train(const StatureDataset& data, const TrainConfig& cfg);

  // (height m, mass kg); pure and deterministic.
  std::pair<double, double> predict(const Eigen::Matrix<double, kNumShape, 1>& beta,
                                    const GenderFlags& gender) const;
  std::pair<double, double> predict(const Eigen::Matrix<double, 12, 1>& input) const;

  // d(height, mass)/d(input) for the fitter's shape-consistency term.
  Eigen::Matrix<double, 2, 12> input_jacobian(
      const Eigen::Matrix<double, 12, 1>& input) const;

  double sigma_h() const { return sigma_h_; }
  double sigma_m() const { return sigma_m_; }
  int hidden() const { return static_cast<int>(w1_.rows()); }
  // Mean per-sample training loss per epoch, in label units.
  const std::vector<double>& epoch_loss() const { return epoch_loss_; }

  void save_json(const std::string& path) const;
  static StatureNet load_json(const std::string& path);

 private:
  StatureNet() = default;
  Eigen::Vector2d forward_std(const Eigen::Matrix<double, 12, 1>& x_std) const;

  MatX w1_;  // hidden x 12
  VecX b1_;  // hidden
  MatX w2_;  // 2 x hidden
  VecX b2_;  // 2
  Eigen::Matrix<double, 12, 1> in_mean_, in_scale_;
  Eigen::Vector2d out_mean_, out_scale_;
  double sigma_h_ = 1.0, sigma_m_ = 1.0;
  uint64_t seed_ = 0;
  std::vector<double> epoch_loss_;
};

}  // namespace bedsim
