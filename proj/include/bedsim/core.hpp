#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace bedsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kGravity = 9.81;  // m/s^2

// Rigid transform x -> R*x + t.
struct Transform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return R * x + t; }
  Transform then(const Transform& outer) const {
    // outer * this
    return Transform{outer.R * R, outer.R * t + outer.t};
  }
};

// Deterministic RNG. All distributions are implemented explicitly on top of
// mt19937_64 so that streams are fully specified by this code (the standard
// library distribution objects are not portable across implementations).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return state_(); }

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(state_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * unit(); }

  // Box-Muller without caching; consumes exactly two draws per call.
  double normal(double mu = 0.0, double sigma = 1.0) {
    const double u1 = 1.0 - unit();  // (0, 1]
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Multiply-shift; bias is negligible for the n used here (n << 2^32).
    return static_cast<uint64_t>(unit() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 state_;
};

// Derives an independent per-item seed from a base seed, stable across
// worker counts and run order (splitmix finalizer over base ^ index).
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  uint64_t z = base ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace bedsim
