#include "bedsim/body_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

namespace bedsim {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Rotations
// ---------------------------------------------------------------------------

static Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 rodrigues(const Vec3& w) {
  const double th = w.norm();
  if (th < 1e-12) return Mat3::Identity() + skew(w);
  const Vec3 axis = w / th;
  return Eigen::AngleAxisd(th, axis).toRotationMatrix();
}

std::array<Mat3, 3> rodrigues_jacobian(const Vec3& w) {
  // d(exp([w]x))/dw_i, exact closed form; reduces to [e_i]x at w = 0.
  std::array<Mat3, 3> out;
  const double n2 = w.squaredNorm();
  const Mat3 R = rodrigues(w);
  if (n2 < 1e-16) {
    for (int i = 0; i < 3; ++i) out[i] = skew(Vec3::Unit(i));
    return out;
  }
  for (int i = 0; i < 3; ++i) {
    const Vec3 ei = Vec3::Unit(i);
    const Vec3 tmp = w.cross((Mat3::Identity() - R) * ei);
    out[i] = ((w(i) * skew(w) + skew(tmp)) / n2) * R;
  }
  return out;
}

Mat3 euler_xyz(const Vec3& abc) {
  const double ca = std::cos(abc(0)), sa = std::sin(abc(0));
  const double cb = std::cos(abc(1)), sb = std::sin(abc(1));
  const double cc = std::cos(abc(2)), sc = std::sin(abc(2));
  Mat3 Rx, Ry, Rz;
  Rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
  Ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  Rz << cc, -sc, 0, sc, cc, 0, 0, 0, 1;
  return Rz * Ry * Rx;
}

std::array<Mat3, 3> euler_xyz_jacobian(const Vec3& abc) {
  const double ca = std::cos(abc(0)), sa = std::sin(abc(0));
  const double cb = std::cos(abc(1)), sb = std::sin(abc(1));
  const double cc = std::cos(abc(2)), sc = std::sin(abc(2));
  Mat3 Rx, Ry, Rz, dRx, dRy, dRz;
  Rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
  Ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  Rz << cc, -sc, 0, sc, cc, 0, 0, 0, 1;
  dRx << 0, 0, 0, 0, -sa, -ca, 0, ca, -sa;
  dRy << -sb, 0, cb, 0, 0, 0, -cb, 0, -sb;
  dRz << -sc, -cc, 0, cc, -sc, 0, 0, 0, 0;
  return {Rz * Ry * dRx, Rz * dRy * Rx, dRz * Ry * Rx};
}

double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  // Closest distance between segments, clamped parametric solve.
  const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double kEps = 1e-14;
  if (a <= kEps && e <= kEps) {
    return r.norm();
  }
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      if (denom > kEps)
        s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + d1 * s) - (q0 + d2 * t)).norm();
}

// ---------------------------------------------------------------------------
// BodyParams
// ---------------------------------------------------------------------------

VecX BodyParams::packed() const {
  VecX x(kNumParams);
  x.segment<kNumShape>(0) = beta;
  x.segment<kNumPoseAngles>(kNumShape) = theta;
  x.segment<3>(kNumShape + kNumPoseAngles) = phi;
  x.segment<3>(kNumShape + kNumPoseAngles + 3) = trans;
  return x;
}

void BodyParams::set_packed(const VecX& x) {
  if (x.size() != kNumParams) throw std::invalid_argument("packed parameter size mismatch");
  beta = x.segment<kNumShape>(0);
  theta = x.segment<kNumPoseAngles>(kNumShape);
  phi = x.segment<3>(kNumShape + kNumPoseAngles);
  trans = x.segment<3>(kNumShape + kNumPoseAngles + 3);
}

bool BodyParams::all_finite() const {
  return beta.allFinite() && theta.allFinite() && phi.allFinite() && trans.allFinite() &&
         std::isfinite(gender[0]) && std::isfinite(gender[1]) &&
         (!cam_to_bed || std::isfinite(*cam_to_bed));
}

Eigen::Matrix<double, kNumPoseAngles, 1> joint_limit_upper() {
  Eigen::Matrix<double, kNumPoseAngles, 1> hi;
  hi.setConstant(2.8);
  for (int j : {3, 6, 9, 13, 14})  // spine segments and collars: nearly rigid
    hi.segment<3>((j - 1) * 3).setConstant(0.7);
  for (int j : {12, 15})  // neck and head
    hi.segment<3>((j - 1) * 3).setConstant(1.0);
  return hi;
}

Eigen::Matrix<double, kNumPoseAngles, 1> joint_limit_lower() {
  return -joint_limit_upper();
}

void clamp_pose_angles(Eigen::Matrix<double, kNumPoseAngles, 1>& theta) {
  const auto hi = joint_limit_upper();
  theta = theta.cwiseMax(-hi).cwiseMin(hi);
}

// ---------------------------------------------------------------------------
// Template queries
// ---------------------------------------------------------------------------

static void blend_weights(const GenderFlags& g, double& wm, double& wf) {
  const double s = g[0] + g[1];
  if (!(s > 0.0)) throw std::invalid_argument("gender flags must not both be zero");
  wm = g[0] / s;
  wf = g[1] / s;
}

std::vector<double> BodyModel::part_fractions(const GenderFlags& g) const {
  double wm, wf;
  blend_weights(g, wm, wf);
  std::vector<double> out(part_frac_male_.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = wm * part_frac_male_[i] + wf * part_frac_female_[i];
  return out;
}

double BodyModel::reference_mass(const GenderFlags& g) const {
  double wm, wf;
  blend_weights(g, wm, wf);
  return wm * ref_mass_male_ + wf * ref_mass_female_;
}

double BodyModel::reference_volume(const GenderFlags& g) const {
  if (g == kMale) return ref_volume_male_;
  if (g == kFemale) return ref_volume_female_;
  if (g == kNeutral) return ref_volume_neutral_;
  Eigen::Matrix<double, kNumShape, 1> zero = Eigen::Matrix<double, kNumShape, 1>::Zero();
  TriMesh m{shaped_vertices(zero, g), faces_};
  return mesh_volume(m).volume;
}

std::vector<Vec3> BodyModel::shaped_vertices(const Eigen::Matrix<double, kNumShape, 1>& beta,
                                             const GenderFlags& g) const {
  double wm, wf;
  blend_weights(g, wm, wf);
  std::vector<Vec3> v = verts0_;
  for (size_t i = 0; i < v.size(); ++i) {
    v[i] += wf * gender_morph_[i];
    for (int k = 0; k < kNumShape; ++k) v[i] += beta(k) * blend_[k][i];
  }
  return v;
}

std::array<Vec3, kNumJoints> BodyModel::rest_joints(
    const Eigen::Matrix<double, kNumShape, 1>& beta, const GenderFlags& g) const {
  const std::vector<Vec3> v = shaped_vertices(beta, g);
  std::array<Vec3, kNumJoints> j{};
  for (int k = 0; k < kNumJoints; ++k) {
    Vec3 p = Vec3::Zero();
    for (const auto& [vi, w] : regressor_[k]) p += w * v[vi];
    j[k] = p;
  }
  return j;
}

double BodyModel::shaped_height(const Eigen::Matrix<double, kNumShape, 1>& beta,
                                const GenderFlags& g) const {
  const std::vector<Vec3> v = shaped_vertices(beta, g);
  double lo = v[0].y(), hi = v[0].y();
  for (const auto& p : v) {
    lo = std::min(lo, p.y());
    hi = std::max(hi, p.y());
  }
  return hi - lo;
}

// ---------------------------------------------------------------------------
// Forward kinematics and posing
// ---------------------------------------------------------------------------

std::array<Transform, kNumJoints> BodyModel::forward_frames(
    const BodyParams& params, const std::array<Vec3, kNumJoints>& j0) const {
  std::array<Transform, kNumJoints> A;
  const Mat3 Rr = euler_xyz(params.phi);
  A[0].R = Rr;
  A[0].t = j0[0] - Rr * j0[0] + params.trans;
  for (int j = 1; j < kNumJoints; ++j) {
    const Mat3 Rj = rodrigues(params.theta.segment<3>(3 * (j - 1)));
    Transform L{Rj, j0[j] - Rj * j0[j]};
    const Transform& P = A[parents_[j]];
    A[j].R = P.R * L.R;
    A[j].t = P.R * L.t + P.t;
  }
  return A;
}

SkeletonPose BodyModel::pose_skeleton(const BodyParams& params, SkeletonJacobian* jac) const {
  if (!params.all_finite()) throw std::invalid_argument("non-finite body parameters");
  const auto j0 = rest_joints(params.beta, params.gender);
  SkeletonPose out;
  out.frames = forward_frames(params, j0);
  for (int j = 0; j < kNumJoints; ++j) out.joints[j] = out.frames[j].apply(j0[j]);
  if (!jac) return out;

  jac->dframes.assign(kNumJoints, Eigen::Matrix<double, 12, kNumParams>::Zero());
  jac->djoints.setZero();
  jac->drest.setZero();

  // Rest joints are linear in beta through the regressor and the blend fields.
  for (int k = 0; k < kNumShape; ++k) {
    for (int j = 0; j < kNumJoints; ++j) {
      Vec3 d = Vec3::Zero();
      for (const auto& [vi, w] : regressor_[j]) d += w * blend_[k][vi];
      jac->drest.block<3, 1>(3 * j, k) = d;
    }
  }

  const int kPhi = kNumShape + kNumPoseAngles;
  const int kTrans = kPhi + 3;

  // Local transforms and their derivatives.
  std::array<Mat3, kNumJoints> Rloc;
  Rloc[0] = euler_xyz(params.phi);
  const auto dRroot = euler_xyz_jacobian(params.phi);
  std::array<std::array<Mat3, 3>, kNumJoints> dRloc;
  dRloc[0] = dRroot;
  for (int j = 1; j < kNumJoints; ++j) {
    const Vec3 w = params.theta.segment<3>(3 * (j - 1));
    Rloc[j] = rodrigues(w);
    dRloc[j] = rodrigues_jacobian(w);
  }

  // Forward sensitivity per parameter. dA_j = dA_p * L_j + A_p * dL_j with
  // dL_j nonzero only for this joint's angles (rotation part) and beta
  // (translation part, through the rest joints).
  auto get_dj0 = [&](int joint, int p) -> Vec3 {
    if (p < kNumShape) return jac->drest.block<3, 1>(3 * joint, p);
    return Vec3::Zero();
  };

  for (int p = 0; p < kNumParams; ++p) {
    for (int j = 0; j < kNumJoints; ++j) {
      Mat3 dR_param = Mat3::Zero();
      bool has_rot = false;
      if (j == 0 && p >= kPhi && p < kPhi + 3) {
        dR_param = dRroot[p - kPhi];
        has_rot = true;
      } else if (j >= 1 && p >= kNumShape && p < kNumShape + kNumPoseAngles) {
        const int owner = p - kNumShape;
        if (owner / 3 == j - 1) {
          dR_param = dRloc[j][owner % 3];
          has_rot = true;
        }
      }
      const Vec3 dj0 = get_dj0(j, p);
      const Vec3 j0j = j0[j];
      // dL: rotation dR_param, translation d(j0 - R j0).
      Mat3 dL_R = has_rot ? dR_param : Mat3::Zero();
      Vec3 dL_t = dj0 - Rloc[j] * dj0;
      if (has_rot) dL_t -= dR_param * j0j;

      Mat3 dA_R;
      Vec3 dA_t;
      if (j == 0) {
        dA_R = dL_R;
        dA_t = dL_t;
        if (p >= kTrans) dA_t += Vec3::Unit(p - kTrans);
      } else {
        const int par = parents_[j];
        const auto& dFp = jac->dframes[par];
        Mat3 dAp_R;
        dAp_R << dFp(0, p), dFp(1, p), dFp(2, p), dFp(3, p), dFp(4, p), dFp(5, p), dFp(6, p),
            dFp(7, p), dFp(8, p);
        const Vec3 dAp_t(dFp(9, p), dFp(10, p), dFp(11, p));
        const Transform& Ap = out.frames[par];
        const Transform Lj{Rloc[j], j0j - Rloc[j] * j0j};
        dA_R = dAp_R * Lj.R + Ap.R * dL_R;
        dA_t = dAp_R * Lj.t + dAp_t + Ap.R * dL_t;
      }
      auto& dF = jac->dframes[j];
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) dF(3 * r + c, p) = dA_R(r, c);
      dF.block<3, 1>(9, p) = dA_t;
      // d(posed joint) = dA(j0) + A.R * dj0.
      jac->djoints.block<3, 1>(3 * j, p) = dA_R * j0j + dA_t + out.frames[j].R * dj0;
    }
  }
  return out;
}

BodyMesh BodyModel::pose(const BodyParams& params) const { return pose(params, nullptr); }

BodyMesh BodyModel::pose(const BodyParams& params, PoseJacobian* jac) const {
  if (!params.all_finite()) throw std::invalid_argument("non-finite body parameters");
  const auto v0 = shaped_vertices(params.beta, params.gender);
  SkeletonJacobian skel_jac;
  const SkeletonPose skel = pose_skeleton(params, jac ? &skel_jac : nullptr);

  BodyMesh mesh;
  mesh.faces = faces_;
  mesh.vertices.resize(v0.size());
  for (size_t i = 0; i < v0.size(); ++i) {
    Vec3 p = Vec3::Zero();
    for (const auto& [f, w] : weights_[i]) {
      if (w == 0.0f) continue;
      p += static_cast<double>(w) * skel.frames[f].apply(v0[i]);
    }
    mesh.vertices[i] = p;
  }
  for (int k = 0; k < kNumJoints; ++k) {
    Vec3 p = Vec3::Zero();
    for (const auto& [vi, w] : regressor_[k]) p += w * mesh.vertices[vi];
    mesh.joints[k] = p;
  }

  if (jac) {
    jac->djoints = skel_jac.djoints;
    jac->dframes = skel_jac.dframes;
    const int n = static_cast<int>(v0.size());
    jac->dvertices.resize(3 * n, kNumParams);
    jac->dvertices.setZero();
    // Selector S(v): d(R v + t) as a 3x12 map over the flattened frame.
    Eigen::Matrix<double, 3, 12> S = Eigen::Matrix<double, 3, 12>::Zero();
    for (int i = 0; i < n; ++i) {
      const Vec3& v = v0[i];
      for (int r = 0; r < 3; ++r) {
        S(r, 3 * r + 0) = v.x();
        S(r, 3 * r + 1) = v.y();
        S(r, 3 * r + 2) = v.z();
        S(r, 9 + r) = 1.0;
      }
      auto row = jac->dvertices.block(3 * i, 0, 3, kNumParams);
      for (const auto& [f, w] : weights_[i]) {
        if (w == 0.0f) continue;
        const double wd = static_cast<double>(w);
        row.noalias() += wd * (S * skel_jac.dframes[f]);
        // Shape fields also move the rest vertex itself: w * R_f * dv0/dbeta.
        for (int k = 0; k < kNumShape; ++k)
          row.block<3, 1>(0, k) += wd * (skel.frames[f].R * blend_[k][i]);
      }
    }
  }
  return mesh;
}

CapsuleChain BodyModel::posed_capsules(const BodyParams& params) const {
  const SkeletonPose skel = pose_skeleton(params);
  const auto j0 = rest_joints(params.beta, params.gender);
  double wm, wf;
  blend_weights(params.gender, wm, wf);

  CapsuleChain chain;
  const int nc = static_cast<int>(capsules_.size());
  chain.capsules.resize(nc);
  chain.length.resize(nc);
  chain.volume.resize(nc);
  chain.part.resize(nc);
  for (int c = 0; c < nc; ++c) {
    const CapsuleDef& def = capsules_[c];
    PosedCapsule pc;
    pc.radius = wm * def.radius + wf * def.radius_female;
    pc.p0 = skel.joints[def.joint_a];
    pc.p1 = def.joint_b >= 0 ? skel.joints[def.joint_b]
                             : skel.frames[def.frame].apply(j0[def.joint_a] + def.end_offset);
    chain.capsules[c] = pc;
    chain.length[c] = (pc.p1 - pc.p0).norm();
    chain.volume[c] =
        M_PI * pc.radius * pc.radius * chain.length[c] + (4.0 / 3.0) * M_PI * std::pow(pc.radius, 3);
    chain.part[c] = def.part;
  }
  return chain;
}

std::vector<double> BodyModel::capsule_rest_volumes(
    const Eigen::Matrix<double, kNumShape, 1>& beta, const GenderFlags& g) const {
  BodyParams p;
  p.beta = beta;
  p.gender = g;
  const CapsuleChain chain = posed_capsules(p);
  return chain.volume;
}

// ---------------------------------------------------------------------------
// Mass model
// ---------------------------------------------------------------------------

double BodyModel::body_mass(double mesh_volume_m3, const GenderFlags& g) const {
  if (!(mesh_volume_m3 > 0.0)) throw std::invalid_argument("mesh volume must be positive");
  return reference_mass(g) * mesh_volume_m3 / reference_volume(g);
}

void BodyModel::capsule_masses(CapsuleChain& chain, double mesh_volume_m3,
                               const GenderFlags& g) const {
  const int nc = static_cast<int>(chain.volume.size());
  if (nc != static_cast<int>(capsules_.size()))
    throw std::invalid_argument("capsule chain size mismatch");
  if (!(mesh_volume_m3 > 0.0)) throw std::invalid_argument("mesh volume must be positive");

  double wm, wf;
  blend_weights(g, wm, wf);
  std::vector<double> vol0(nc);
  if (g == kMale) {
    vol0 = cap_volume0_male_;
  } else if (g == kFemale) {
    vol0 = cap_volume0_female_;
  } else if (g == kNeutral) {
    vol0 = cap_volume0_neutral_;
  } else {
    Eigen::Matrix<double, kNumShape, 1> zero = Eigen::Matrix<double, kNumShape, 1>::Zero();
    vol0 = capsule_rest_volumes(zero, g);
  }

  const std::vector<double> frac = part_fractions(g);
  const double mbar = reference_mass(g);
  const double vbar_mesh = reference_volume(g);

  // Template part volumes (sum of template capsule volumes per part).
  std::vector<double> part_vol0(part_names_.size(), 0.0);
  for (int c = 0; c < nc; ++c) part_vol0[chain.part[c]] += vol0[c];

  chain.rest_mass.resize(nc);
  chain.mass.resize(nc);
  double sum_v0 = 0.0, sum_v = 0.0;
  for (int c = 0; c < nc; ++c) {
    sum_v0 += vol0[c];
    sum_v += chain.volume[c];
    if (!(chain.volume[c] > 0.0)) throw std::invalid_argument("capsule volume must be positive");
  }
  for (int c = 0; c < nc; ++c) {
    // Template capsule mass: share of the part mass by template volume.
    const double mbar_c = mbar * frac[chain.part[c]] * vol0[c] / part_vol0[chain.part[c]];
    // Shape-scaled capsule mass, then the whole-body correction that maps the
    // capsule total onto the mesh-volume-derived body mass.
    const double m_c = mbar_c * chain.volume[c] / vol0[c];
    chain.rest_mass[c] = mbar_c;
    chain.mass[c] = m_c * (sum_v0 / sum_v) * (mesh_volume_m3 / vbar_mesh);
  }
}

// ---------------------------------------------------------------------------
// Self collision
// ---------------------------------------------------------------------------

bool BodyModel::pair_checked(int cap_a, int cap_b) const {
  if (cap_a > cap_b) std::swap(cap_a, cap_b);
  for (const auto& [a, b] : collision_pairs_)
    if (a == cap_a && b == cap_b) return true;
  return false;
}

SelfCollisionReport BodyModel::check_self_collision(
    const std::vector<PosedCapsule>& caps) const {
  SelfCollisionReport rep;
  for (const auto& [a, b] : collision_pairs_) {
    const double d =
        segment_distance(caps[a].p0, caps[a].p1, caps[b].p0, caps[b].p1);
    const double rsum = caps[a].radius + caps[b].radius;
    if (d < rsum) {
      rep.collides = true;
      rep.capsule_a = a;
      rep.capsule_b = b;
      rep.distance = d;
      rep.radius_sum = rsum;
      return rep;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Validation and serialization
// ---------------------------------------------------------------------------

void BodyModel::validate() const {
  if (verts0_.empty() || faces_.empty()) throw std::runtime_error("empty template");
  TriMesh m{verts0_, faces_};
  if (!is_watertight(m)) throw std::runtime_error("template surface is not watertight");
  for (size_t i = 0; i < verts0_.size(); ++i) {
    double sum = 0.0;
    for (const auto& [f, w] : weights_[i]) {
      if (f < 0 || f >= kNumJoints || w < 0.0) throw std::runtime_error("bad skin weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::runtime_error("skin weights must sum to 1");
  }
  for (int j = 0; j < kNumJoints; ++j) {
    if (regressor_[j].empty()) throw std::runtime_error("empty regressor row");
    double sum = 0.0;
    for (const auto& [vi, w] : regressor_[j]) {
      if (vi < 0 || vi >= static_cast<int>(verts0_.size()))
        throw std::runtime_error("regressor vertex out of range");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::runtime_error("regressor row must be affine");
  }
  if (parents_[0] != -1) throw std::runtime_error("joint 0 must be the root");
  for (int j = 1; j < kNumJoints; ++j)
    if (parents_[j] < 0 || parents_[j] >= j) throw std::runtime_error("bad joint tree order");
}

void BodyModel::save(const std::string& obj_path, const std::string& json_path) const {
  write_obj(obj_path, TriMesh{verts0_, faces_});

  json j;
  j["format"] = "bedsim-template-v1";
  j["joint_names"] = joint_names_;
  j["parents"] = parents_;
  auto vec3_list = [](const std::vector<Vec3>& v) {
    std::vector<std::array<double, 3>> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = {v[i].x(), v[i].y(), v[i].z()};
    return out;
  };
  j["gender_morph"] = vec3_list(gender_morph_);
  for (int k = 0; k < kNumShape; ++k) j["shape_fields"][k] = vec3_list(blend_[k]);
  {
    std::vector<std::vector<std::pair<int, double>>> w(verts0_.size());
    for (size_t i = 0; i < verts0_.size(); ++i)
      for (const auto& [f, wt] : weights_[i])
        if (wt > 0.0) w[i].push_back({f, wt});
    j["skin_weights"] = w;
  }
  {
    std::vector<std::vector<std::pair<int, double>>> r(kNumJoints);
    for (int k = 0; k < kNumJoints; ++k) r[k] = regressor_[k];
    j["joint_regressor"] = r;
  }
  for (const auto& c : capsules_) {
    j["capsules"].push_back({{"name", c.name},
                             {"frame", c.frame},
                             {"joint_a", c.joint_a},
                             {"joint_b", c.joint_b},
                             {"end_offset", {c.end_offset.x(), c.end_offset.y(), c.end_offset.z()}},
                             {"radius", c.radius},
                             {"radius_female", c.radius_female},
                             {"part", c.part}});
  }
  j["part_names"] = part_names_;
  j["part_fractions_male"] = part_frac_male_;
  j["part_fractions_female"] = part_frac_female_;
  j["vertex_part"] = vertex_part_;
  j["reference_mass_male"] = ref_mass_male_;
  j["reference_mass_female"] = ref_mass_female_;
  j["collision_pairs"] = collision_pairs_;

  std::ofstream os(json_path);
  if (!os) throw std::runtime_error("cannot open for write: " + json_path);
  os << j.dump(1, '\t') << "\n";
}

BodyModel BodyModel::load(const std::string& obj_path, const std::string& json_path) {
  BodyModel m;
  const TriMesh mesh = read_obj(obj_path);
  m.verts0_ = mesh.vertices;
  m.faces_ = mesh.faces;

  std::ifstream is(json_path);
  if (!is) throw std::runtime_error("cannot open for read: " + json_path);
  json j;
  is >> j;
  if (j.value("format", "") != std::string("bedsim-template-v1"))
    throw std::runtime_error("unsupported template format");

  const auto names = j.at("joint_names").get<std::vector<std::string>>();
  const auto parents = j.at("parents").get<std::vector<int>>();
  if (names.size() != kNumJoints || parents.size() != kNumJoints)
    throw std::runtime_error("template must carry 24 joints");
  std::copy(names.begin(), names.end(), m.joint_names_.begin());
  std::copy(parents.begin(), parents.end(), m.parents_.begin());

  auto read_vec3_list = [](const json& arr) {
    std::vector<Vec3> out;
    out.reserve(arr.size());
    for (const auto& e : arr) out.emplace_back(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
    return out;
  };
  m.gender_morph_ = read_vec3_list(j.at("gender_morph"));
  for (int k = 0; k < kNumShape; ++k) m.blend_[k] = read_vec3_list(j.at("shape_fields")[k]);

  const auto weights = j.at("skin_weights").get<std::vector<std::vector<std::pair<int, double>>>>();
  if (weights.size() != m.verts0_.size())
    throw std::runtime_error("skin weight count does not match vertices");
  m.weights_.resize(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    m.weights_[i].fill({0, 0.0});
    if (weights[i].size() > 4) throw std::runtime_error("more than 4 weights per vertex");
    for (size_t k = 0; k < weights[i].size(); ++k) m.weights_[i][k] = weights[i][k];
  }
  const auto reg = j.at("joint_regressor").get<std::vector<std::vector<std::pair<int, double>>>>();
  if (reg.size() != kNumJoints) throw std::runtime_error("regressor must carry 24 rows");
  for (int k = 0; k < kNumJoints; ++k) m.regressor_[k] = reg[k];

  for (const auto& cj : j.at("capsules")) {
    CapsuleDef c;
    c.name = cj.at("name").get<std::string>();
    c.frame = cj.at("frame").get<int>();
    c.joint_a = cj.at("joint_a").get<int>();
    c.joint_b = cj.at("joint_b").get<int>();
    const auto& eo = cj.at("end_offset");
    c.end_offset = Vec3(eo[0].get<double>(), eo[1].get<double>(), eo[2].get<double>());
    c.radius = cj.at("radius").get<double>();
    c.radius_female = cj.at("radius_female").get<double>();
    c.part = cj.at("part").get<int>();
    m.capsules_.push_back(c);
  }
  m.part_names_ = j.at("part_names").get<std::vector<std::string>>();
  m.part_frac_male_ = j.at("part_fractions_male").get<std::vector<double>>();
  m.part_frac_female_ = j.at("part_fractions_female").get<std::vector<double>>();
  m.vertex_part_ = j.at("vertex_part").get<std::vector<int>>();
  m.ref_mass_male_ = j.at("reference_mass_male").get<double>();
  m.ref_mass_female_ = j.at("reference_mass_female").get<double>();
  m.collision_pairs_ = j.at("collision_pairs").get<std::vector<std::pair<int, int>>>();

  m.validate();
  // Rebuild the cached beta = 0 volumes.
  Eigen::Matrix<double, kNumShape, 1> zero = Eigen::Matrix<double, kNumShape, 1>::Zero();
  m.ref_volume_male_ = mesh_volume(TriMesh{m.shaped_vertices(zero, kMale), m.faces_}).volume;
  m.ref_volume_female_ = mesh_volume(TriMesh{m.shaped_vertices(zero, kFemale), m.faces_}).volume;
  m.ref_volume_neutral_ = mesh_volume(TriMesh{m.shaped_vertices(zero, kNeutral), m.faces_}).volume;
  m.cap_volume0_male_ = m.capsule_rest_volumes(zero, kMale);
  m.cap_volume0_female_ = m.capsule_rest_volumes(zero, kFemale);
  m.cap_volume0_neutral_ = m.capsule_rest_volumes(zero, kNeutral);
  return m;
}

// Defined in body_template.cpp.
BodyModel build_template(double grid_step);

BodyModel BodyModel::built_in(double grid_step) {
  static std::mutex mu;
  static std::map<double, BodyModel> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(grid_step);
  if (it == cache.end()) it = cache.emplace(grid_step, build_template(grid_step)).first;
  return it->second;
}

}  // namespace bedsim
