#pragma once

#include "bedsim/core.hpp"
#include "bedsim/mesh.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace bedsim {

inline constexpr int kNumJoints = 24;
inline constexpr int kNumShape = 10;         // beta
inline constexpr int kNumPoseJoints = 23;    // articulated joints (all but root)
inline constexpr int kNumPoseAngles = 69;    // 23 joints x 3 axis-angle coords
inline constexpr int kNumCapsules = 20;
// Parameter vector order used by Jacobians and the fitter:
// [beta(10), theta(69), phi(3), trans(3)].
inline constexpr int kNumParams = kNumShape + kNumPoseAngles + 3 + 3;

// Gender flags: male {1,0}, female {0,1}, gender-neutral {1,1}.
using GenderFlags = std::array<double, 2>;
inline constexpr GenderFlags kMale{1.0, 0.0};
inline constexpr GenderFlags kFemale{0.0, 1.0};
inline constexpr GenderFlags kNeutral{1.0, 1.0};

struct BodyParams {
  Eigen::Matrix<double, kNumShape, 1> beta = Eigen::Matrix<double, kNumShape, 1>::Zero();
  Eigen::Matrix<double, kNumPoseAngles, 1> theta =
      Eigen::Matrix<double, kNumPoseAngles, 1>::Zero();
  Vec3 phi = Vec3::Zero();    // global rotation, intrinsic XYZ Euler about the root
  Vec3 trans = Vec3::Zero();  // s, meters, world frame
  GenderFlags gender = kMale;
  std::optional<double> cam_to_bed;  // b, meters; defaults to the scene value

  VecX packed() const;                     // [beta, theta, phi, trans]
  void set_packed(const VecX& x);          // inverse of packed()
  bool all_finite() const;
};

// Nominal articulation range per pose angle (radians), used to project poses
// during settling and fitting: wide limbs, tight spine/collars, moderate
// neck/head. Lower bounds are the negation of the upper bounds.
Eigen::Matrix<double, kNumPoseAngles, 1> joint_limit_upper();
Eigen::Matrix<double, kNumPoseAngles, 1> joint_limit_lower();
// Clamps theta into the limit box in place.
void clamp_pose_angles(Eigen::Matrix<double, kNumPoseAngles, 1>& theta);

// Posed surface plus regressed joint positions. Topology (faces) is shared
// with the owning model; the vertex count is fixed per template.
struct BodyMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::array<Vec3, kNumJoints> joints;

  TriMesh as_trimesh() const { return TriMesh{vertices, faces}; }
};

// One collision/mass capsule. The axis runs between two skeleton joints
// (joint_b >= 0) or from joint_a to joint_a + end_offset in the frame of
// `frame` (used for the head). `part` indexes the body-part mass table.
struct CapsuleDef {
  std::string name;
  int frame = 0;    // skeleton frame whose transform carries this capsule
  int joint_a = 0;
  int joint_b = -1;
  Vec3 end_offset = Vec3::Zero();
  double radius = 0.0;         // male template radius, m
  double radius_female = 0.0;  // female template radius, m
  int part = 0;
};

struct PosedCapsule {
  Vec3 p0, p1;
  double radius = 0.0;
};

// Capsule chain with per-capsule geometry/mass bookkeeping for one body.
struct CapsuleChain {
  std::vector<PosedCapsule> capsules;      // 20, posed
  std::vector<double> length;              // m
  std::vector<double> volume;              // V_c, m^3 (cylinder + end caps)
  std::vector<double> rest_mass;           // m̄_c, kg (template capsule mass)
  std::vector<double> mass;                // m̃_c, kg (shape-corrected)
  std::vector<int> part;                   // body-part id per capsule
};

// Forward-kinematics state without the surface (cheap to differentiate).
struct SkeletonPose {
  std::array<Vec3, kNumJoints> joints;
  std::array<Transform, kNumJoints> frames;  // rest-world -> posed-world, s folded in
};

struct SkeletonJacobian {
  Eigen::Matrix<double, 3 * kNumJoints, kNumParams> djoints;
  std::vector<Eigen::Matrix<double, 12, kNumParams>> dframes;  // per joint: [R(9); t(3)]
  // Rest-joint derivatives with respect to beta (zero for other params).
  Eigen::Matrix<double, 3 * kNumJoints, kNumShape> drest;
};

// Dense derivative of a posed body with respect to the packed parameters.
struct PoseJacobian {
  // d(vertex xyz)/d(param): rows are 3*i+axis, columns follow packed() order.
  MatX dvertices;
  // d(joint xyz)/d(param): rows are 3*j+axis.
  Eigen::Matrix<double, 3 * kNumJoints, kNumParams> djoints;
  // Skinning-frame derivatives (rotation columns and origin) per joint and
  // parameter; needed to differentiate capsule endpoints with offsets.
  // Layout: frame_rot[j].col block is d(R)/d(param p) flattened 9 rows.
  std::vector<Eigen::Matrix<double, 12, kNumParams>> dframes;  // per joint: [R(9); t(3)]
};

struct SelfCollisionReport {
  bool collides = false;
  int capsule_a = -1, capsule_b = -1;
  double distance = 0.0, radius_sum = 0.0;
};

// Parametric body template: watertight capsule-union surface, 24-joint tree,
// 10 orthogonal shape displacement fields, one gender morph field, linear
// blend skinning, and an exact sparse joint regressor.
class BodyModel {
 public:
  // Procedurally built template; `grid_step` is the isosurface meshing pitch
  // (meters). The default lands near 2k vertices. Expensive; build once.
  static BodyModel built_in(double grid_step = 0.058);

  // Template serialization: OBJ geometry plus a JSON sidecar holding the
  // skeleton, skinning weights, regressor, shape fields, and mass constants.
  // Any vertex count is accepted on load (external templates included).
  void save(const std::string& obj_path, const std::string& json_path) const;
  static BodyModel load(const std::string& obj_path, const std::string& json_path);

  // --- Template queries -----------------------------------------------------
  int vertex_count() const { return static_cast<int>(verts0_.size()); }
  const std::vector<std::array<int, 3>>& faces() const { return faces_; }
  const std::array<int, kNumJoints>& parents() const { return parents_; }
  const std::vector<CapsuleDef>& capsule_defs() const { return capsules_; }
  const std::vector<std::string>& part_names() const { return part_names_; }
  // Body-part mass fractions for the given gender; sums to 1 exactly.
  std::vector<double> part_fractions(const GenderFlags& g) const;
  double reference_mass(const GenderFlags& g) const;   // m̄_g, kg
  double reference_volume(const GenderFlags& g) const; // V̄_g, m^3 (beta = 0)
  // Per-vertex body-part label (fixed per template, independent of pose).
  const std::vector<int>& vertex_part() const { return vertex_part_; }

  // Rest vertices for (beta, gender): template + gender morph + blend fields.
  std::vector<Vec3> shaped_vertices(const Eigen::Matrix<double, kNumShape, 1>& beta,
                                    const GenderFlags& g) const;
  // Rest joints regressed from shaped vertices.
  std::array<Vec3, kNumJoints> rest_joints(const Eigen::Matrix<double, kNumShape, 1>& beta,
                                           const GenderFlags& g) const;
  // Standing-height equivalent: extent along the long body axis of the
  // shaped rest template, meters.
  double shaped_height(const Eigen::Matrix<double, kNumShape, 1>& beta,
                       const GenderFlags& g) const;

  // --- Posing ----------------------------------------------------------------
  // Rejects non-finite parameters. Joints are the regressor applied to posed
  // vertices, which coincides with forward kinematics by construction.
  BodyMesh pose(const BodyParams& params) const;
  BodyMesh pose(const BodyParams& params, PoseJacobian* jac) const;

  // Skeleton-only forward kinematics (no surface); used by the settling
  // solver where the full vertex Jacobian would be wasted work.
  SkeletonPose pose_skeleton(const BodyParams& params,
                             SkeletonJacobian* jac = nullptr) const;

  // Posed capsule chain; volumes/masses follow the shaped skeleton lengths.
  CapsuleChain posed_capsules(const BodyParams& params) const;

  // Appendix-style mass model.
  // Whole-body mass from mesh volume: m = m̄_g * V / V̄_g.
  double body_mass(double mesh_volume_m3, const GenderFlags& g) const;
  // Distributes part masses over capsules and applies the whole-body volume
  // correction; inputs are the live capsule volumes and live mesh volume.
  // Writes rest_mass (m̄_c) and mass (m̃_c) into the chain.
  void capsule_masses(CapsuleChain& chain, double mesh_volume_m3,
                      const GenderFlags& g) const;

  // Segment-to-segment distance test over non-adjacent capsule pairs.
  SelfCollisionReport check_self_collision(const std::vector<PosedCapsule>& caps) const;
  bool pair_checked(int cap_a, int cap_b) const;  // false for adjacent pairs

  // Capsule rest volumes for (beta, gender) without posing.
  std::vector<double> capsule_rest_volumes(const Eigen::Matrix<double, kNumShape, 1>& beta,
                                           const GenderFlags& g) const;

 private:
  friend BodyModel build_template(double grid_step);
  BodyModel() = default;

  void validate() const;
  std::array<Transform, kNumJoints> forward_frames(
      const BodyParams& params, const std::array<Vec3, kNumJoints>& j0) const;

  // Template data ------------------------------------------------------------
  std::vector<Vec3> verts0_;                       // male base, rest pose
  std::vector<std::array<int, 3>> faces_;
  std::array<int, kNumJoints> parents_{};
  std::array<std::string, kNumJoints> joint_names_;
  std::vector<Vec3> gender_morph_;                 // female = base + morph
  std::array<std::vector<Vec3>, kNumShape> blend_; // orthogonal shape fields
  // Sparse skinning weights: per vertex up to 4 (frame, weight) pairs.
  std::vector<std::array<std::pair<int, double>, 4>> weights_;
  // Sparse joint regressor rows: (vertex, weight); affine (weights sum to 1)
  // and supported on vertices rigidly bound to the joint's carrier frame.
  std::array<std::vector<std::pair<int, double>>, kNumJoints> regressor_;
  std::vector<CapsuleDef> capsules_;
  std::vector<std::string> part_names_;
  std::vector<double> part_frac_male_, part_frac_female_;
  std::vector<int> vertex_part_;
  double ref_mass_male_ = 75.0, ref_mass_female_ = 60.0;
  // Cached beta=0 volumes: male, female, neutral.
  double ref_volume_male_ = 0.0, ref_volume_female_ = 0.0, ref_volume_neutral_ = 0.0;
  // Capsule rest volumes per gender (beta = 0).
  std::vector<double> cap_volume0_male_, cap_volume0_female_, cap_volume0_neutral_;
  // Non-adjacent capsule pair list for the self-collision test.
  std::vector<std::pair<int, int>> collision_pairs_;
};

// Minimum distance between two segments [p0,p1] and [q0,q1].
double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

// Axis-angle to rotation matrix (Rodrigues) and its partials d(R)/d(w_i),
// stable near w = 0.
Mat3 rodrigues(const Vec3& w);
std::array<Mat3, 3> rodrigues_jacobian(const Vec3& w);

// Intrinsic XYZ Euler rotation Rz(c)*Ry(b)*Rx(a) and partials.
Mat3 euler_xyz(const Vec3& abc);
std::array<Mat3, 3> euler_xyz_jacobian(const Vec3& abc);

}  // namespace bedsim
