#include "bedsim/metrics.hpp"

#include <doctest.h>

#include <cmath>

namespace bedsim {
namespace {

FloatGrid random_map(Rng& rng, GridKind kind, double lo = 0.0, double hi = 3.0) {
  FloatGrid g(64, 27, kind);
  for (auto& v : g.data) v = static_cast<float>(rng.uniform(lo, hi));
  return g;
}

FloatGrid random_binary(Rng& rng) {
  FloatGrid g(64, 27, GridKind::kContact);
  for (auto& v : g.data) v = rng.unit() < 0.5 ? 0.0f : 1.0f;
  return g;
}

ParamsInstance random_instance(Rng& rng, bool with_b) {
  ParamsInstance p;
  for (int i = 0; i < kNumShape; ++i) p.beta[i] = rng.uniform(-3, 3);
  for (int i = 0; i < kNumPoseAngles; ++i) p.theta[i] = rng.normal(0, 0.5);
  for (int i = 0; i < 3; ++i) p.phi[i] = rng.uniform(-3.14, 3.14);
  for (auto& j : p.joints)
    j = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  if (with_b) p.cam_to_bed = rng.uniform(1.0, 2.5);
  return p;
}

LossNormalizers random_normalizers(Rng& rng) {
  LossNormalizers n;
  auto draw = [&] { return rng.uniform(0.1, 4.0); };
  n.sigma_beta = draw();
  n.sigma_theta = draw();
  n.sigma_rot = draw();
  n.sigma_joint = draw();
  n.sigma_b = draw();
  n.sigma_vertex = draw();
  n.sigma_sink = draw();
  n.sigma_sink_contact = draw();
  n.sigma_pressure = draw();
  n.sigma_pressure_contact = draw();
  n.sigma_depth = draw();
  n.sigma_depth_contact = draw();
  return n;
}

// Independent scalar-loop evaluations of every formula under test.

double naive_loss_params(const ParamsInstance& a, const ParamsInstance& b,
                         const LossNormalizers& n) {
  double t_beta = 0;
  for (int i = 0; i < 10; ++i) t_beta += std::fabs(a.beta[i] - b.beta[i]);
  t_beta /= 10.0 * n.sigma_beta;
  double t_theta = 0;
  for (int i = 0; i < 69; ++i) t_theta += std::fabs(a.theta[i] - b.theta[i]);
  t_theta /= 69.0 * n.sigma_theta;
  double t_rot = 0;
  for (int u = 0; u < 3; ++u) {
    t_rot += std::fabs(std::cos(a.phi[u]) - std::cos(b.phi[u]));
    t_rot += std::fabs(std::sin(a.phi[u]) - std::sin(b.phi[u]));
  }
  t_rot /= 6.0 * n.sigma_rot;
  double t_j = 0;
  for (int j = 0; j < 24; ++j) {
    double d2 = 0;
    for (int k = 0; k < 3; ++k) {
      const double d = a.joints[j][k] - b.joints[j][k];
      d2 += d * d;
    }
    t_j += std::sqrt(d2);
  }
  t_j /= 24.0 * n.sigma_joint;
  double t_b = 0;
  if (a.cam_to_bed && b.cam_to_bed)
    t_b = std::fabs(*a.cam_to_bed - *b.cam_to_bed) / n.sigma_b;
  return t_beta + t_theta + t_rot + t_j + t_b;
}

double naive_l1(const FloatGrid& a, const FloatGrid& b) {
  double s = 0;
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c)
      s += std::fabs(double(a.at(r, c)) - double(b.at(r, c)));
  return s;
}

double naive_l2sq(const FloatGrid& a, const FloatGrid& b) {
  double s = 0;
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) {
      const double d = double(a.at(r, c)) - double(b.at(r, c));
      s += d * d;
    }
  return s;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("mpjpe closed forms and oracle") {
    Rng rng(11);
    std::array<Vec3, kNumJoints> a{}, b{};
    for (auto& j : a) j = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK(mpjpe_mm(a, a) == doctest::Approx(0.0));
    b = a;
    for (auto& j : b) j += Vec3(0.03, 0, 0);
    CHECK(mpjpe_mm(a, b) == doctest::Approx(30.0).epsilon(1e-12));
    for (int trial = 0; trial < 100; ++trial) {
      for (auto& j : b)
        j = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      double naive = 0;
      for (int j = 0; j < 24; ++j) {
        double d2 = 0;
        for (int k = 0; k < 3; ++k) d2 += (a[j][k] - b[j][k]) * (a[j][k] - b[j][k]);
        naive += std::sqrt(d2);
      }
      naive = 1000.0 * naive / 24.0;
      CHECK(mpjpe_mm(a, b) == doctest::Approx(naive).epsilon(1e-9));
      CHECK(mpjpe_mm(a, b) == doctest::Approx(mpjpe_mm(b, a)).epsilon(1e-12));
    }
    std::vector<Vec3> too_short(23, Vec3::Zero());
    std::vector<Vec3> right(24, Vec3::Zero());
    CHECK_THROWS_AS(mpjpe_mm(too_short, right), std::invalid_argument);
  }

  TEST_CASE("parameter loss: zero, closed form, beta-only term") {
    Rng rng(12);
    LossNormalizers unit;
    ParamsInstance a = random_instance(rng, true);
    CHECK(loss_params(a, a, unit) == doctest::Approx(0.0));
    ParamsInstance b = a;
    for (int i = 0; i < 10; ++i) b.beta[i] += 1.0;
    CHECK(loss_params(b, a, unit) == doctest::Approx(1.0).epsilon(1e-12));
    // Missing b on one side drops the distance term.
    ParamsInstance c = a;
    c.cam_to_bed.reset();
    ParamsInstance d = a;
    d.cam_to_bed = *a.cam_to_bed + 0.5;
    CHECK(loss_params(c, a, unit) == doctest::Approx(0.0));
    CHECK(loss_params(d, a, unit) == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("parameter loss matches the naive loop on random instances") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
      const ParamsInstance a = random_instance(rng, trial % 2 == 0);
      const ParamsInstance b = random_instance(rng, trial % 3 != 0);
      const LossNormalizers n = random_normalizers(rng);
      const double fast = loss_params(a, b, n);
      const double naive = naive_loss_params(a, b, n);
      CHECK(fast == doctest::Approx(naive).epsilon(1e-9));
      CHECK(fast >= 0.0);
      CHECK(loss_params(b, a, n) == doctest::Approx(fast).epsilon(1e-12));
    }
  }

  TEST_CASE("vertex loss: zero, naive oracle, mismatch rejected") {
    Rng rng(14);
    LossNormalizers n;
    n.sigma_vertex = 0.7;
    std::vector<Vec3> a(123), b(123);
    for (auto& v : a) v = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK(loss_vertex(a, a, n) == doctest::Approx(0.0));
    for (int trial = 0; trial < 100; ++trial) {
      for (auto& v : b)
        v = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      double naive = 0;
      for (size_t i = 0; i < a.size(); ++i) {
        double d2 = 0;
        for (int k = 0; k < 3; ++k) d2 += (a[i][k] - b[i][k]) * (a[i][k] - b[i][k]);
        naive += std::sqrt(d2);
      }
      naive /= a.size() * n.sigma_vertex;
      CHECK(loss_vertex(a, b, n) == doctest::Approx(naive).epsilon(1e-9));
    }
    std::vector<Vec3> shorter(50, Vec3::Zero());
    CHECK_THROWS_AS(loss_vertex(a, shorter, n), std::invalid_argument);
  }

  TEST_CASE("map losses: zero, naive oracles, shape checks") {
    Rng rng(15);
    for (int trial = 0; trial < 100; ++trial) {
      const FloatGrid p = random_map(rng, GridKind::kSinkRecon);
      const FloatGrid q = random_map(rng, GridKind::kSinkRecon);
      const FloatGrid cp = random_binary(rng);
      const FloatGrid cq = random_binary(rng);
      const LossNormalizers n = random_normalizers(rng);

      const double sink = loss_sink_map(p, q, cp, cq, n);
      const double sink_naive = naive_l2sq(p, q) / (1728.0 * n.sigma_sink) +
                                naive_l1(cp, cq) / (1728.0 * n.sigma_sink_contact);
      CHECK(sink == doctest::Approx(sink_naive).epsilon(1e-9));

      const double press = loss_pressure(p, q, cp, cq, n);
      const double press_naive =
          naive_l1(p, q) / (1728.0 * n.sigma_pressure) +
          naive_l1(cp, cq) / (1728.0 * n.sigma_pressure_contact);
      CHECK(press == doctest::Approx(press_naive).epsilon(1e-9));

      const double depth = loss_depth_map(p, q, cp, cq, n);
      const double depth_naive =
          naive_l2sq(p, q) / (1728.0 * n.sigma_depth) +
          naive_l1(cp, cq) / (1728.0 * n.sigma_depth_contact);
      CHECK(depth == doctest::Approx(depth_naive).epsilon(1e-9));

      CHECK(loss_sink_map(p, p, cp, cp, n) == doctest::Approx(0.0));
      CHECK(loss_pressure(p, p, cp, cp, n) == doctest::Approx(0.0));
      CHECK(loss_depth_map(p, p, cp, cp, n) == doctest::Approx(0.0));
      // Symmetry of the underlying norms.
      CHECK(loss_pressure(q, p, cq, cp, n) == doctest::Approx(press).epsilon(1e-12));
      CHECK(loss_sink_map(q, p, cq, cp, n) == doctest::Approx(sink).epsilon(1e-12));
    }
    LossNormalizers n;
    FloatGrid wrong(32, 27, GridKind::kSinkRecon);
    FloatGrid right(64, 27, GridKind::kSinkRecon);
    FloatGrid contact(64, 27, GridKind::kContact);
    CHECK_THROWS_AS(loss_sink_map(wrong, wrong, contact, contact, n),
                    std::invalid_argument);
    CHECK_THROWS_AS(loss_pressure(right, wrong, contact, contact, n),
                    std::invalid_argument);
    LossNormalizers bad;
    bad.sigma_depth = 0.0;
    CHECK_THROWS_AS(loss_depth_map(right, right, contact, contact, bad),
                    std::invalid_argument);
  }

  TEST_CASE("per-taxel pressure MSE") {
    Rng rng(16);
    PressureGrid a, b;
    a.grid = random_map(rng, GridKind::kPressure);
    b.grid = a.grid;
    CHECK(pressure_mse(a, b) == doctest::Approx(0.0));
    b.grid.at(10, 10) += 1.0f;
    CHECK(pressure_mse(a, b) == doctest::Approx(1.0 / 1728.0).epsilon(1e-9));
    for (int trial = 0; trial < 100; ++trial) {
      b.grid = random_map(rng, GridKind::kPressure);
      const double naive = naive_l2sq(a.grid, b.grid) / 1728.0;
      CHECK(pressure_mse(a, b) == doctest::Approx(naive).epsilon(1e-9));
      CHECK(pressure_mse(b, a) == doctest::Approx(pressure_mse(a, b)).epsilon(1e-12));
    }
    PressureGrid wrong;
    wrong.grid = FloatGrid(64, 26, GridKind::kPressure);
    CHECK_THROWS_AS(pressure_mse(a, wrong), std::invalid_argument);
  }

  TEST_CASE("std_dev helper") {
    CHECK(std_dev({}) == doctest::Approx(0.0));
    CHECK(std_dev({3.0}) == doctest::Approx(0.0));
    CHECK(std_dev({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }
}

}  // namespace bedsim
