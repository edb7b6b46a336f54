#pragma once

#include "bedsim/core.hpp"

namespace bedsim {

// Plain ADAM with optional L2 weight decay (decay added to the gradient).
// Shared by the stature regressor training loop and the body fitter.
class Adam {
 public:
  Adam(int n, double lr, double weight_decay = 0.0, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr),
        wd_(weight_decay),
        b1_(beta1),
        b2_(beta2),
        eps_(eps),
        m_(VecX::Zero(n)),
        v_(VecX::Zero(n)) {}

  int size() const { return static_cast<int>(m_.size()); }
  long steps() const { return t_; }
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  // One in-place update; bias-corrected first/second moments.
  void step(VecX& params, const VecX& grad) {
    if (grad.size() != m_.size() || params.size() != m_.size())
      throw std::invalid_argument("adam: size mismatch");
    ++t_;
    const VecX g = wd_ == 0.0 ? grad : VecX(grad + wd_ * params);
    m_ = b1_ * m_ + (1.0 - b1_) * g;
    v_ = b2_ * v_ + (1.0 - b2_) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      const double mh = m_[i] / c1;
      const double vh = v_[i] / c2;
      params[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
  }

 private:
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  VecX m_, v_;
};

}  // namespace bedsim
