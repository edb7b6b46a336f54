#include "bedsim/body_model.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"

using namespace bedsim;
namespace fs = std::filesystem;

namespace {

const BodyModel& model() {
  static const BodyModel m = BodyModel::built_in();
  return m;
}

BodyParams random_params(Rng& rng, double pose_scale = 0.6) {
  BodyParams p;
  for (int i = 0; i < kNumShape; ++i) p.beta[i] = rng.uniform(-2.0, 2.0);
  for (int i = 0; i < kNumPoseAngles; ++i) p.theta[i] = rng.normal(0.0, 0.25 * pose_scale);
  p.phi = Vec3(rng.normal(0, 0.4), rng.normal(0, 0.4), rng.normal(0, 0.4));
  p.trans = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 1));
  const int g = static_cast<int>(rng.below(3));
  p.gender = g == 0 ? kMale : (g == 1 ? kFemale : kNeutral);
  return p;
}

// Independent forward-kinematics oracle: walks the joint tree composing
// local axis-angle rotations about the shaped rest joints, then applies the
// root rotation and translation. Shares no code with BodyModel::pose.
std::array<Vec3, kNumJoints> fk_oracle(const BodyModel& m, const BodyParams& p) {
  const auto j0 = m.rest_joints(p.beta, p.gender);
  const auto& parents = m.parents();

  std::array<Mat3, kNumJoints> R;
  std::array<Vec3, kNumJoints> t;
  // Root: intrinsic XYZ Euler about the rest root joint, then translate.
  const Mat3 R0 = (Eigen::AngleAxisd(p.phi.z(), Vec3::UnitZ()) *
                   Eigen::AngleAxisd(p.phi.y(), Vec3::UnitY()) *
                   Eigen::AngleAxisd(p.phi.x(), Vec3::UnitX()))
                      .toRotationMatrix();
  R[0] = R0;
  t[0] = j0[0] - R0 * j0[0] + p.trans;
  for (int j = 1; j < kNumJoints; ++j) {
    const Vec3 w = p.theta.segment<3>(3 * (j - 1));
    const double ang = w.norm();
    const Mat3 L = ang < 1e-18
                       ? Mat3::Identity()
                       : Eigen::AngleAxisd(ang, w / ang).toRotationMatrix();
    const int par = parents[j];
    R[j] = R[par] * L;
    // The joint is a fixed point of its parent chain: A_j(j0_j) = A_par(j0_j).
    t[j] = R[par] * j0[j] + t[par] - R[j] * j0[j];
  }
  std::array<Vec3, kNumJoints> out;
  for (int j = 0; j < kNumJoints; ++j) out[j] = R[j] * j0[j] + t[j];
  return out;
}

// Brute-force minimum distance between two segments by dense sampling.
double segment_distance_sampled(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                const Vec3& q1, int n = 600) {
  double best = 1e30;
  for (int i = 0; i <= n; ++i) {
    const Vec3 a = p0 + (p1 - p0) * (static_cast<double>(i) / n);
    for (int j = 0; j <= n; ++j) {
      const Vec3 b = q0 + (q1 - q0) * (static_cast<double>(j) / n);
      best = std::min(best, (a - b).norm());
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("body_model") {

TEST_CASE("template is watertight with plausible size and mass constants") {
  const BodyModel& m = model();
  CHECK(m.vertex_count() >= 1200);
  CHECK(m.vertex_count() <= 4200);
  TriMesh rest{m.shaped_vertices(Eigen::Matrix<double, kNumShape, 1>::Zero(), kMale),
               m.faces()};
  CHECK(is_watertight(rest));
  const double vol = mesh_volume(rest).volume;
  CHECK(vol > 0.045);
  CHECK(vol < 0.115);
  CHECK(m.reference_mass(kMale) == 75.0);
  CHECK(m.reference_mass(kFemale) == 60.0);
  CHECK(m.capsule_defs().size() == kNumCapsules);
  CHECK(m.reference_volume(kMale) == doctest::Approx(vol).epsilon(1e-12));

  for (const GenderFlags& g : {kMale, kFemale, kNeutral}) {
    const auto frac = m.part_fractions(g);
    double sum = 0.0;
    for (double f : frac) {
      CHECK(f > 0.0);
      sum += f;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("gendered templates differ plausibly") {
  const BodyModel& m = model();
  CHECK(m.reference_volume(kFemale) < m.reference_volume(kMale));
  CHECK(m.reference_volume(kNeutral) < m.reference_volume(kMale));
  CHECK(m.reference_volume(kNeutral) > m.reference_volume(kFemale));
  const Eigen::Matrix<double, kNumShape, 1> zero =
      Eigen::Matrix<double, kNumShape, 1>::Zero();
  const double hm = m.shaped_height(zero, kMale);
  const double hf = m.shaped_height(zero, kFemale);
  CHECK(hm > 1.55);
  CHECK(hm < 2.00);
  CHECK(hf < hm);
  TriMesh female{m.shaped_vertices(zero, kFemale), m.faces()};
  CHECK(is_watertight(female));
}

TEST_CASE("rest pose is the identity configuration") {
  const BodyModel& m = model();
  const BodyParams rest;
  const BodyMesh posed = m.pose(rest);
  const auto shaped = m.shaped_vertices(rest.beta, rest.gender);
  REQUIRE(posed.vertices.size() == shaped.size());
  for (size_t i = 0; i < shaped.size(); ++i)
    CHECK((posed.vertices[i] - shaped[i]).norm() < 1e-12);
  CHECK(posed.joints[0].norm() < 1e-9);
}

TEST_CASE("translation equivariance is exact") {
  const BodyModel& m = model();
  Rng rng(11);
  BodyParams p = random_params(rng);
  const BodyMesh a = m.pose(p);
  p.trans += Vec3(0.1, 0.0, 0.0);
  const BodyMesh b = m.pose(p);
  for (size_t i = 0; i < a.vertices.size(); ++i) {
    const Vec3 d = b.vertices[i] - a.vertices[i];
    CHECK((d - Vec3(0.1, 0, 0)).norm() < 1e-12);
  }
  for (int j = 0; j < kNumJoints; ++j)
    CHECK((b.joints[j] - a.joints[j] - Vec3(0.1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("regressed joints match the forward-kinematics oracle") {
  const BodyModel& m = model();
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const BodyParams p = random_params(rng, 1.2);
    const BodyMesh posed = m.pose(p);
    const auto want = fk_oracle(m, p);
    for (int j = 0; j < kNumJoints; ++j)
      CHECK((posed.joints[j] - want[j]).norm() < 1e-6);
  }
}

TEST_CASE("skeleton-only pose agrees with the full pose") {
  const BodyModel& m = model();
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const BodyParams p = random_params(rng);
    const BodyMesh full = m.pose(p);
    const SkeletonPose sk = m.pose_skeleton(p);
    for (int j = 0; j < kNumJoints; ++j)
      CHECK((full.joints[j] - sk.joints[j]).norm() < 1e-9);
  }
}

TEST_CASE("non-finite parameters are rejected") {
  const BodyModel& m = model();
  BodyParams p;
  p.theta[5] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(m.pose(p));
  BodyParams q;
  q.gender = GenderFlags{0.0, 0.0};
  CHECK_THROWS(m.pose(q));
}

TEST_CASE("rodrigues jacobian matches finite differences") {
  Rng rng(5);
  const double h = 1e-6;
  for (int trial = 0; trial < 40; ++trial) {
    Vec3 w(rng.normal(0, 1.2), rng.normal(0, 1.2), rng.normal(0, 1.2));
    if (trial % 5 == 0) w *= 1e-9;  // near the origin
    const auto J = rodrigues_jacobian(w);
    for (int i = 0; i < 3; ++i) {
      Vec3 wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const Mat3 fd = (rodrigues(wp) - rodrigues(wm)) / (2.0 * h);
      CHECK((J[i] - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("euler jacobian matches finite differences") {
  Rng rng(6);
  const double h = 1e-6;
  for (int trial = 0; trial < 40; ++trial) {
    const Vec3 abc(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3));
    const auto J = euler_xyz_jacobian(abc);
    for (int i = 0; i < 3; ++i) {
      Vec3 ap = abc, am = abc;
      ap[i] += h;
      am[i] -= h;
      const Mat3 fd = (euler_xyz(ap) - euler_xyz(am)) / (2.0 * h);
      CHECK((J[i] - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("pose jacobian matches finite differences") {
  const BodyModel& m = model();
  Rng rng(31);
  const BodyParams p = random_params(rng);
  PoseJacobian jac;
  m.pose(p, &jac);
  const VecX x0 = p.packed();
  const double h = 1e-6;

  // Probe a spread of vertices and every joint against central differences
  // over all parameters.
  std::vector<int> probe;
  for (int i = 0; i < m.vertex_count(); i += m.vertex_count() / 17) probe.push_back(i);
  for (int c = 0; c < kNumParams; ++c) {
    VecX xp = x0, xm = x0;
    xp[c] += h;
    xm[c] -= h;
    BodyParams pp = p, pm = p;
    pp.set_packed(xp);
    pm.set_packed(xm);
    const BodyMesh mp = m.pose(pp);
    const BodyMesh mm = m.pose(pm);
    for (int v : probe) {
      const Vec3 fd = (mp.vertices[v] - mm.vertices[v]) / (2.0 * h);
      const Vec3 an = jac.dvertices.block<3, 1>(3 * v, c);
      CHECK((an - fd).norm() < 5e-6);
    }
    for (int j = 0; j < kNumJoints; ++j) {
      const Vec3 fd = (mp.joints[j] - mm.joints[j]) / (2.0 * h);
      const Vec3 an = jac.djoints.block<3, 1>(3 * j, c);
      CHECK((an - fd).norm() < 5e-6);
    }
  }
}

TEST_CASE("skeleton jacobian frames match finite differences") {
  const BodyModel& m = model();
  Rng rng(32);
  const BodyParams p = random_params(rng);
  SkeletonJacobian jac;
  m.pose_skeleton(p, &jac);
  const VecX x0 = p.packed();
  const double h = 1e-6;
  for (int c = 0; c < kNumParams; c += 7) {
    VecX xp = x0, xm = x0;
    xp[c] += h;
    xm[c] -= h;
    BodyParams pp = p, pm = p;
    pp.set_packed(xp);
    pm.set_packed(xm);
    const SkeletonPose sp = m.pose_skeleton(pp);
    const SkeletonPose sm = m.pose_skeleton(pm);
    for (int j = 0; j < kNumJoints; ++j) {
      for (int r = 0; r < 3; ++r)
        for (int cc = 0; cc < 3; ++cc) {
          const double fd = (sp.frames[j].R(r, cc) - sm.frames[j].R(r, cc)) / (2.0 * h);
          CHECK(jac.dframes[j](3 * r + cc, c) == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
        }
      for (int r = 0; r < 3; ++r) {
        const double fd = (sp.frames[j].t[r] - sm.frames[j].t[r]) / (2.0 * h);
        CHECK(jac.dframes[j](9 + r, c) == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("segment distance matches dense sampling and analytic cases") {
  // Analytic: crossing segments, parallel segments, degenerate points.
  CHECK(segment_distance(Vec3(-1, 0, 0), Vec3(1, 0, 0), Vec3(0, -1, 1), Vec3(0, 1, 1)) ==
        doctest::Approx(1.0));
  CHECK(segment_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)) ==
        doctest::Approx(1.0));
  CHECK(segment_distance(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(1, 1, 1)) ==
        doctest::Approx(std::sqrt(3.0)));
  CHECK(segment_distance(Vec3(-1, 0, 0), Vec3(1, 0, 0), Vec3(0, -1, 0), Vec3(0, 1, 0)) ==
        doctest::Approx(0.0));

  Rng rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    auto rp = [&] { return Vec3(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7)); };
    const Vec3 p0 = rp(), p1 = rp(), q0 = rp(), q1 = rp();
    const double got = segment_distance(p0, p1, q0, q1);
    const double ref = segment_distance_sampled(p0, p1, q0, q1);
    CHECK(got <= ref + 1e-12);
    CHECK(got >= ref - 6e-3);
  }
}

TEST_CASE("rest pose is collision free and forced overlap is caught") {
  const BodyModel& m = model();
  const CapsuleChain chain = m.posed_capsules(BodyParams{});
  REQUIRE(chain.capsules.size() == kNumCapsules);
  const auto report = m.check_self_collision(chain.capsules);
  CHECK(!report.collides);

  // Teleport the left hand onto the head.
  int hand = -1, head = -1;
  for (int c = 0; c < kNumCapsules; ++c) {
    if (m.capsule_defs()[c].name == "hand_l") hand = c;
    if (m.capsule_defs()[c].name == "head") head = c;
  }
  REQUIRE(hand >= 0);
  REQUIRE(head >= 0);
  CHECK(m.pair_checked(hand, head));
  auto caps = chain.capsules;
  caps[hand].p0 = caps[head].p0;
  caps[hand].p1 = caps[head].p1 + Vec3(0.01, 0.01, 0.0);
  const auto report2 = m.check_self_collision(caps);
  CHECK(report2.collides);
}

TEST_CASE("self collision agrees with a brute-force oracle on random poses") {
  const BodyModel& m = model();
  Rng rng(99);
  int positives = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const BodyParams p = random_params(rng, 0.9);
    const CapsuleChain chain = m.posed_capsules(p);
    bool brute = false;
    for (int a = 0; a < kNumCapsules && !brute; ++a)
      for (int b = a + 1; b < kNumCapsules && !brute; ++b) {
        if (!m.pair_checked(a, b)) continue;
        const double d = segment_distance(chain.capsules[a].p0, chain.capsules[a].p1,
                                          chain.capsules[b].p0, chain.capsules[b].p1);
        if (d < chain.capsules[a].radius + chain.capsules[b].radius) brute = true;
      }
    const bool got = m.check_self_collision(chain.capsules).collides;
    CHECK(got == brute);
    positives += got;
  }
  // The wild-pose distribution must exercise both outcomes.
  CHECK(positives > 5);
  CHECK(positives < 995);
}

TEST_CASE("body mass follows the volume ratio") {
  const BodyModel& m = model();
  CHECK(m.body_mass(m.reference_volume(kMale), kMale) == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(m.body_mass(2.0 * m.reference_volume(kMale), kMale) ==
        doctest::Approx(150.0).epsilon(1e-12));
  Rng rng(4);
  BodyParams p = random_params(rng);
  p.theta.setZero();
  p.phi.setZero();
  p.trans.setZero();
  const TriMesh shaped{m.shaped_vertices(p.beta, p.gender), m.faces()};
  const double vol = mesh_volume(shaped).volume;
  const double want = m.reference_mass(p.gender) * vol / m.reference_volume(p.gender);
  CHECK(m.body_mass(vol, p.gender) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("capsule masses conserve the reference mass at beta zero") {
  const BodyModel& m = model();
  for (const GenderFlags& g : {kMale, kFemale, kNeutral}) {
    BodyParams p;
    p.gender = g;
    CapsuleChain chain = m.posed_capsules(p);
    m.capsule_masses(chain, m.reference_volume(g), g);
    double total = 0.0;
    for (int c = 0; c < kNumCapsules; ++c) {
      CHECK(chain.mass[c] == doctest::Approx(chain.rest_mass[c]).epsilon(1e-9));
      total += chain.mass[c];
    }
    const double mbar = m.reference_mass(g);
    CHECK(std::abs(total - mbar) < 1e-9 * mbar);

    // Per-part sums recover the mass-fraction table.
    const auto frac = m.part_fractions(g);
    std::vector<double> part_mass(frac.size(), 0.0);
    for (int c = 0; c < kNumCapsules; ++c) part_mass[chain.part[c]] += chain.mass[c];
    for (size_t r = 0; r < frac.size(); ++r)
      CHECK(part_mass[r] / mbar == doctest::Approx(frac[r]).epsilon(1e-9));
  }
}

TEST_CASE("capsule masses scale linearly under uniform volume scaling") {
  const BodyModel& m = model();
  BodyParams p;
  CapsuleChain chain = m.posed_capsules(p);
  const double k = 1.37;
  for (auto& v : chain.volume) v *= k;
  m.capsule_masses(chain, k * m.reference_volume(kMale), kMale);
  double total = 0.0;
  for (double mass : chain.mass) total += mass;
  CHECK(std::abs(total - k * 75.0) < 1e-9 * k * 75.0);
}

TEST_CASE("capsule masses reject degenerate volumes") {
  const BodyModel& m = model();
  CapsuleChain chain = m.posed_capsules(BodyParams{});
  chain.volume[3] = 0.0;
  CHECK_THROWS(m.capsule_masses(chain, m.reference_volume(kMale), kMale));
  CHECK_THROWS(m.body_mass(-0.1, kMale));
}

TEST_CASE("shape fields are orthogonal and move height monotonically") {
  const BodyModel& m = model();
  Eigen::Matrix<double, kNumShape, 1> beta = Eigen::Matrix<double, kNumShape, 1>::Zero();
  const double h0 = m.shaped_height(beta, kMale);
  beta[1] = 2.0;
  const double hplus = m.shaped_height(beta, kMale);
  beta[1] = -2.0;
  const double hminus = m.shaped_height(beta, kMale);
  CHECK(hplus > h0);
  CHECK(hminus < h0);

  // Orthogonality of the displacement fields via posed differences at small
  // beta steps (the fields are linear, so differences recover them exactly).
  const auto base = m.shaped_vertices(Eigen::Matrix<double, kNumShape, 1>::Zero(), kMale);
  std::vector<std::vector<Vec3>> fields(kNumShape);
  for (int k = 0; k < kNumShape; ++k) {
    Eigen::Matrix<double, kNumShape, 1> b = Eigen::Matrix<double, kNumShape, 1>::Zero();
    b[k] = 1.0;
    const auto moved = m.shaped_vertices(b, kMale);
    fields[k].resize(base.size());
    for (size_t i = 0; i < base.size(); ++i) fields[k][i] = moved[i] - base[i];
  }
  for (int a = 0; a < kNumShape; ++a)
    for (int b = a + 1; b < kNumShape; ++b) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (size_t i = 0; i < base.size(); ++i) {
        dot += fields[a][i].dot(fields[b][i]);
        na += fields[a][i].squaredNorm();
        nb += fields[b][i].squaredNorm();
      }
      CHECK(std::abs(dot) < 1e-8 * std::sqrt(na * nb));
    }
}

TEST_CASE("skinning weights are a partition of unity") {
  const BodyModel& m = model();
  const BodyParams rest;
  const BodyMesh posed = m.pose(rest);
  // Implicitly validated at construction; spot-check via equivariance under
  // a pure global rotation: |v| about the root must be preserved for the
  // vertex cloud centered at the rest root joint.
  BodyParams rot;
  rot.phi = Vec3(0.3, -0.2, 0.9);
  const BodyMesh r = m.pose(rot);
  for (size_t i = 0; i < posed.vertices.size(); i += 37)
    CHECK(r.vertices[i].norm() == doctest::Approx(posed.vertices[i].norm()).epsilon(1e-9));
}

TEST_CASE("template save/load round-trips posing behavior") {
  const BodyModel& m = model();
  const auto dir = fs::temp_directory_path();
  const std::string obj = (dir / "bedsim_tpl.obj").string();
  const std::string json = (dir / "bedsim_tpl.json").string();
  m.save(obj, json);
  const BodyModel back = BodyModel::load(obj, json);
  CHECK(back.vertex_count() == m.vertex_count());
  Rng rng(123);
  const BodyParams p = random_params(rng);
  const BodyMesh a = m.pose(p);
  const BodyMesh b = back.pose(p);
  for (size_t i = 0; i < a.vertices.size(); ++i)
    CHECK((a.vertices[i] - b.vertices[i]).norm() < 1e-12);
  for (int j = 0; j < kNumJoints; ++j)
    CHECK((a.joints[j] - b.joints[j]).norm() < 1e-12);
  CHECK(back.reference_volume(kFemale) ==
        doctest::Approx(m.reference_volume(kFemale)).epsilon(1e-12));
  fs::remove(obj);
  fs::remove(json);
}

TEST_CASE("packed parameter order round-trips") {
  Rng rng(17);
  const BodyParams p = random_params(rng);
  const VecX x = p.packed();
  REQUIRE(x.size() == kNumParams);
  CHECK(x[0] == p.beta[0]);
  CHECK(x[kNumShape] == p.theta[0]);
  CHECK(x[kNumShape + kNumPoseAngles] == p.phi[0]);
  CHECK(x[kNumShape + kNumPoseAngles + 3] == p.trans[0]);
  BodyParams q;
  q.gender = p.gender;
  q.set_packed(x);
  CHECK((q.packed() - x).norm() == 0.0);
}

}  // TEST_SUITE
