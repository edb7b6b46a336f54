// Procedural construction of the built-in gendered body template: a
// watertight isosurface of a 20-capsule union, skinned to a 24-joint tree,
// with 10 orthogonal shape displacement fields and a female morph field.
#include "bedsim/body_model.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace bedsim {

namespace {

struct JointSpec {
  const char* name;
  int parent;
  double x, y, z;
};

// Supine rest pose: +y toward the head, +z up, x lateral, pelvis at origin.
// Arms in a slight A-pose so the rest configuration is collision-free.
constexpr JointSpec kJoints[kNumJoints] = {
    {"pelvis", -1, 0.000, 0.000, 0.000},     // 0
    {"hip_l", 0, +0.085, -0.060, -0.005},    // 1
    {"hip_r", 0, -0.085, -0.060, -0.005},    // 2
    {"spine1", 0, 0.000, +0.110, +0.005},    // 3
    {"knee_l", 1, +0.100, -0.490, -0.010},   // 4
    {"knee_r", 2, -0.100, -0.490, -0.010},   // 5
    {"spine2", 3, 0.000, +0.240, +0.005},    // 6
    {"ankle_l", 4, +0.105, -0.900, -0.030},  // 7
    {"ankle_r", 5, -0.105, -0.900, -0.030},  // 8
    {"spine3", 6, 0.000, +0.360, +0.005},    // 9
    {"foot_l", 7, +0.105, -0.955, +0.075},   // 10
    {"foot_r", 8, -0.105, -0.955, +0.075},   // 11
    {"neck", 9, 0.000, +0.500, +0.010},      // 12
    {"collar_l", 9, +0.040, +0.450, +0.010}, // 13
    {"collar_r", 9, -0.040, +0.450, +0.010}, // 14
    {"head", 12, 0.000, +0.565, +0.015},     // 15
    {"shoulder_l", 13, +0.185, +0.455, 0.0}, // 16
    {"shoulder_r", 14, -0.185, +0.455, 0.0}, // 17
    {"elbow_l", 16, +0.435, +0.360, 0.0},    // 18
    {"elbow_r", 17, -0.435, +0.360, 0.0},    // 19
    {"wrist_l", 18, +0.660, +0.275, 0.0},    // 20
    {"wrist_r", 19, -0.660, +0.275, 0.0},    // 21
    {"hand_l", 20, +0.745, +0.245, 0.0},     // 22
    {"hand_r", 21, -0.745, +0.245, 0.0},     // 23
};

// Body parts for the mass-fraction table.
enum Part {
  kHead = 0, kUpperTrunk, kLowerTrunk,
  kUpperArmL, kUpperArmR, kForearmL, kForearmR, kHandL, kHandR,
  kThighL, kThighR, kShankL, kShankR, kFootL, kFootR, kNumParts
};

const char* kPartNames[kNumParts] = {
    "head", "upper_trunk", "lower_trunk", "upper_arm_l", "upper_arm_r",
    "forearm_l", "forearm_r", "hand_l", "hand_r", "thigh_l", "thigh_r",
    "shank_l", "shank_r", "foot_l", "foot_r"};

// Per-mille whole-body mass fractions; each column sums to exactly 1000.
constexpr int kFracMale[kNumParts] = {70, 230, 276, 28, 28, 16, 16, 6, 6,
                                      100, 100, 47, 47, 15, 15};
constexpr int kFracFemale[kNumParts] = {68, 212, 290, 26, 26, 14, 14, 5, 5,
                                        112, 112, 45, 45, 13, 13};

struct CapsuleSpec {
  const char* name;
  int frame, joint_a, joint_b;  // joint_b = -1: axis to joint_a + offset
  double ox, oy, oz;            // end offset (head, buttocks)
  double radius;                // male
  double female_factor;         // female radius = radius * factor
  int part;
};

constexpr CapsuleSpec kCapsules[kNumCapsules] = {
    {"pelvis", 0, 0, -1, 0.0, -0.115, -0.005, 0.126, 0.98, kLowerTrunk},
    {"abdomen", 0, 0, 3, 0, 0, 0, 0.122, 0.95, kLowerTrunk},
    {"chest", 3, 3, 9, 0, 0, 0, 0.122, 0.90, kUpperTrunk},
    {"uppertorso", 9, 9, 12, 0, 0, 0, 0.113, 0.90, kUpperTrunk},
    {"neck", 12, 12, 15, 0, 0, 0, 0.055, 0.92, kHead},
    {"head", 15, 15, -1, 0.0, 0.175, 0.010, 0.098, 0.95, kHead},
    {"clav_l", 13, 13, 16, 0, 0, 0, 0.052, 0.92, kUpperTrunk},
    {"clav_r", 14, 14, 17, 0, 0, 0, 0.052, 0.92, kUpperTrunk},
    {"uarm_l", 16, 16, 18, 0, 0, 0, 0.047, 0.90, kUpperArmL},
    {"uarm_r", 17, 17, 19, 0, 0, 0, 0.047, 0.90, kUpperArmR},
    {"farm_l", 18, 18, 20, 0, 0, 0, 0.039, 0.90, kForearmL},
    {"farm_r", 19, 19, 21, 0, 0, 0, 0.039, 0.90, kForearmR},
    {"hand_l", 20, 20, 22, 0, 0, 0, 0.031, 0.93, kHandL},
    {"hand_r", 21, 21, 23, 0, 0, 0, 0.031, 0.93, kHandR},
    {"thigh_l", 1, 1, 4, 0, 0, 0, 0.078, 0.99, kThighL},
    {"thigh_r", 2, 2, 5, 0, 0, 0, 0.078, 0.99, kThighR},
    {"shank_l", 4, 4, 7, 0, 0, 0, 0.054, 0.93, kShankL},
    {"shank_r", 5, 5, 8, 0, 0, 0, 0.054, 0.93, kShankR},
    {"foot_l", 7, 7, 10, 0, 0, 0, 0.045, 0.93, kFootL},
    {"foot_r", 8, 8, 11, 0, 0, 0, 0.045, 0.93, kFootR},
};

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b, Vec3* closest) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 1e-16 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  const Vec3 c = a + t * ab;
  if (closest) *closest = c;
  return (p - c).norm();
}

struct CapsuleGeom {
  Vec3 a, b;
  double r;
};

// --------------------------------------------------------------------------
// Marching tetrahedra on a Kuhn-split uniform grid. Consistent face
// diagonals across cube boundaries make the extracted isosurface watertight.
// --------------------------------------------------------------------------
struct IsoMesher {
  Vec3 origin;
  double h;
  int nx, ny, nz;  // cell counts
  std::vector<double> sdf;  // (nx+1)*(ny+1)*(nz+1) node values

  int64_t node_id(int i, int j, int k) const {
    return i + static_cast<int64_t>(nx + 1) * (j + static_cast<int64_t>(ny + 1) * k);
  }
  Vec3 node_pos(int i, int j, int k) const {
    return origin + Vec3(i * h, j * h, k * h);
  }

  TriMesh extract() const {
    TriMesh mesh;
    std::map<std::pair<int64_t, int64_t>, int> edge_vertex;

    auto vertex_on_edge = [&](int64_t na, int64_t nb, const Vec3& pa, const Vec3& pb,
                              double sa, double sb) {
      int64_t lo = na, hi = nb;
      Vec3 plo = pa, phi = pb;
      double slo = sa, shi = sb;
      if (lo > hi) {
        std::swap(lo, hi);
        std::swap(plo, phi);
        std::swap(slo, shi);
      }
      const auto key = std::make_pair(lo, hi);
      auto it = edge_vertex.find(key);
      if (it != edge_vertex.end()) return it->second;
      const double t = slo / (slo - shi);
      const int idx = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(plo + t * (phi - plo));
      edge_vertex.emplace(key, idx);
      return idx;
    };

    // The 6 tetrahedra of the Kuhn split share the main diagonal (corner 0
    // to corner 7); corner bit order: 1 = +x, 2 = +y, 4 = +z.
    static const int kTets[6][4] = {{0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7},
                                    {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7}};

    for (int k = 0; k < nz; ++k) {
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          int64_t ids[8];
          Vec3 pos[8];
          double val[8];
          for (int c = 0; c < 8; ++c) {
            const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
            ids[c] = node_id(ci, cj, ck);
            pos[c] = node_pos(ci, cj, ck);
            val[c] = sdf[ids[c]];
          }
          for (const auto& tet : kTets) {
            int inside[4], outside[4];
            int ni = 0, no = 0;
            for (int c = 0; c < 4; ++c) {
              if (val[tet[c]] < 0.0)
                inside[ni++] = tet[c];
              else
                outside[no++] = tet[c];
            }
            if (ni == 0 || ni == 4) continue;

            auto ev = [&](int a, int b) {
              return vertex_on_edge(ids[a], ids[b], pos[a], pos[b], val[a], val[b]);
            };
            Vec3 cin = Vec3::Zero(), cout = Vec3::Zero();
            for (int c = 0; c < ni; ++c) cin += pos[inside[c]];
            for (int c = 0; c < no; ++c) cout += pos[outside[c]];
            const Vec3 dir = cout / no - cin / ni;  // points from inside to outside

            auto emit = [&](int v0, int v1, int v2) {
              if (v0 == v1 || v1 == v2 || v0 == v2) return;
              const Vec3& a = mesh.vertices[v0];
              const Vec3& b = mesh.vertices[v1];
              const Vec3& c = mesh.vertices[v2];
              if ((b - a).cross(c - a).dot(dir) < 0.0)
                mesh.faces.push_back({v0, v2, v1});
              else
                mesh.faces.push_back({v0, v1, v2});
            };

            if (ni == 1) {
              const int a = inside[0];
              emit(ev(a, outside[0]), ev(a, outside[1]), ev(a, outside[2]));
            } else if (ni == 3) {
              const int d = outside[0];
              emit(ev(inside[0], d), ev(inside[1], d), ev(inside[2], d));
            } else {  // 2 in, 2 out: quad in cyclic order
              const int a = inside[0], b = inside[1], c = outside[0], d = outside[1];
              const int vac = ev(a, c), vad = ev(a, d), vbd = ev(b, d), vbc = ev(b, c);
              emit(vac, vad, vbd);
              emit(vac, vbd, vbc);
            }
          }
        }
      }
    }
    return mesh;
  }
};

}  // namespace

BodyModel build_template(double grid_step) {
  if (!(grid_step > 0.015 && grid_step < 0.12))
    throw std::invalid_argument("template grid step out of range");

  BodyModel m;
  for (int j = 0; j < kNumJoints; ++j) {
    m.parents_[j] = kJoints[j].parent;
    m.joint_names_[j] = kJoints[j].name;
  }
  std::array<Vec3, kNumJoints> j0;
  for (int j = 0; j < kNumJoints; ++j) j0[j] = Vec3(kJoints[j].x, kJoints[j].y, kJoints[j].z);

  for (const auto& cs : kCapsules) {
    CapsuleDef def;
    def.name = cs.name;
    def.frame = cs.frame;
    def.joint_a = cs.joint_a;
    def.joint_b = cs.joint_b;
    def.end_offset = Vec3(cs.ox, cs.oy, cs.oz);
    def.radius = cs.radius;
    def.radius_female = cs.radius * cs.female_factor;
    def.part = cs.part;
    m.capsules_.push_back(def);
  }
  m.part_names_.assign(kPartNames, kPartNames + kNumParts);
  m.part_frac_male_.resize(kNumParts);
  m.part_frac_female_.resize(kNumParts);
  for (int p = 0; p < kNumParts; ++p) {
    m.part_frac_male_[p] = kFracMale[p] / 1000.0;
    m.part_frac_female_[p] = kFracFemale[p] / 1000.0;
  }

  // Male rest capsule geometry drives the isosurface.
  std::vector<CapsuleGeom> geom(kNumCapsules);
  for (int c = 0; c < kNumCapsules; ++c) {
    const CapsuleDef& def = m.capsules_[c];
    geom[c].a = j0[def.joint_a];
    geom[c].b = def.joint_b >= 0 ? j0[def.joint_b] : j0[def.joint_a] + def.end_offset;
    geom[c].r = def.radius;
  }
  auto sdf_at = [&](const Vec3& p) {
    double best = 1e9;
    for (const auto& g : geom) best = std::min(best, point_segment_distance(p, g.a, g.b, nullptr) - g.r);
    return best;
  };

  // Sampling grid with margin.
  Vec3 lo(1e9, 1e9, 1e9), hi(-1e9, -1e9, -1e9);
  for (const auto& g : geom) {
    for (const Vec3& p : {g.a, g.b}) {
      lo = lo.cwiseMin(p - Vec3::Constant(g.r));
      hi = hi.cwiseMax(p + Vec3::Constant(g.r));
    }
  }
  const double margin = 2.5 * grid_step;
  lo -= Vec3::Constant(margin);
  hi += Vec3::Constant(margin);

  IsoMesher mesher;
  mesher.origin = lo;
  mesher.h = grid_step;
  mesher.nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / grid_step));
  mesher.ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / grid_step));
  mesher.nz = static_cast<int>(std::ceil((hi.z() - lo.z()) / grid_step));
  mesher.sdf.resize(static_cast<size_t>(mesher.nx + 1) * (mesher.ny + 1) * (mesher.nz + 1));
  for (int k = 0; k <= mesher.nz; ++k)
    for (int j = 0; j <= mesher.ny; ++j)
      for (int i = 0; i <= mesher.nx; ++i) {
        double s = sdf_at(mesher.node_pos(i, j, k));
        if (std::abs(s) < 1e-9) s = 1e-9;  // keep crossings off grid nodes
        mesher.sdf[mesher.node_id(i, j, k)] = s;
      }

  TriMesh surf = mesher.extract();
  if (mesh_volume(surf).volume < 0.0)
    for (auto& f : surf.faces) std::swap(f[1], f[2]);
  m.verts0_ = surf.vertices;
  m.faces_ = surf.faces;
  const int nv = static_cast<int>(m.verts0_.size());

  // ------------------------------------------------------------------------
  // Skinning weights. Every capsule first claims a small patch of surface
  // vertices as rigid (these anchor the exact joint regressor); the rest
  // blend smoothly between the nearest capsule frames.
  // ------------------------------------------------------------------------
  std::vector<int> claimed_by(nv, -1);  // capsule id or -1
  constexpr int kPatchSize = 12;
  for (int c = 0; c < kNumCapsules; ++c) {
    const Vec3 mid = 0.5 * (geom[c].a + geom[c].b);
    std::vector<std::pair<double, int>> order;
    order.reserve(nv);
    for (int i = 0; i < nv; ++i)
      if (claimed_by[i] < 0) order.push_back({(m.verts0_[i] - mid).squaredNorm(), i});
    std::sort(order.begin(), order.end());
    for (int k = 0; k < kPatchSize && k < static_cast<int>(order.size()); ++k)
      claimed_by[order[k].second] = c;
  }

  m.weights_.assign(nv, {});
  m.vertex_part_.assign(nv, 0);
  const double tau = 0.035;  // blend width, m
  for (int i = 0; i < nv; ++i) {
    m.weights_[i].fill({0, 0.0});
    if (claimed_by[i] >= 0) {
      const int c = claimed_by[i];
      m.weights_[i][0] = {m.capsules_[c].frame, 1.0};
      m.vertex_part_[i] = m.capsules_[c].part;
      continue;
    }
    // Per-frame distance: min over that frame's capsules.
    std::map<int, double> frame_dist;
    double dmin = 1e9;
    int best_cap = 0;
    for (int c = 0; c < kNumCapsules; ++c) {
      const double d = point_segment_distance(m.verts0_[i], geom[c].a, geom[c].b, nullptr) -
                       geom[c].r;
      const int f = m.capsules_[c].frame;
      auto it = frame_dist.find(f);
      if (it == frame_dist.end() || d < it->second) frame_dist[f] = d;
      if (d < dmin) {
        dmin = d;
        best_cap = c;
      }
    }
    m.vertex_part_[i] = m.capsules_[best_cap].part;
    std::vector<std::pair<double, int>> cand;  // (weight, frame)
    for (const auto& [f, d] : frame_dist) {
      const double x = (d - dmin) / tau;
      if (x < 1.0) cand.push_back({(1.0 - x) * (1.0 - x), f});
    }
    std::sort(cand.begin(), cand.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    if (cand.size() > 4) cand.resize(4);
    double sum = 0.0;
    for (const auto& [w, f] : cand) sum += w;
    if (cand[0].first / sum > 0.995) {
      m.weights_[i][0] = {cand[0].second, 1.0};
    } else {
      // Fold rounding into the last entry so the weights sum to exactly 1.
      double acc = 0.0;
      for (size_t k = 0; k < cand.size(); ++k) {
        double w = cand[k].first / sum;
        if (k + 1 == cand.size()) w = 1.0 - acc;
        acc += w;
        m.weights_[i][k] = {cand[k].second, w};
      }
    }
  }

  // ------------------------------------------------------------------------
  // Joint regressor: minimum-norm affine combination of a rigid patch of the
  // carrier frame, exact at the rest joints (and therefore exact under
  // posing, because the patch moves rigidly with the carrier).
  // ------------------------------------------------------------------------
  auto frame_has_capsule = [&](int f) {
    for (const auto& c : m.capsules_)
      if (c.frame == f) return true;
    return false;
  };
  for (int j = 0; j < kNumJoints; ++j) {
    int carrier = j;
    while (!frame_has_capsule(carrier)) carrier = m.parents_[carrier];
    // Rigid patch vertices of the carrier frame, nearest to the joint first.
    std::vector<std::pair<double, int>> patch;
    for (int i = 0; i < nv; ++i)
      if (claimed_by[i] >= 0 && m.capsules_[claimed_by[i]].frame == carrier)
        patch.push_back({(m.verts0_[i] - j0[j]).squaredNorm(), i});
    std::sort(patch.begin(), patch.end());
    if (patch.size() < 4) throw std::runtime_error("rigid patch too small for regressor");

    const int K = static_cast<int>(patch.size());
    Eigen::MatrixXd A(4, K);
    for (int k = 0; k < K; ++k) {
      const Vec3& v = m.verts0_[patch[k].second];
      A(0, k) = v.x();
      A(1, k) = v.y();
      A(2, k) = v.z();
      A(3, k) = 1.0;
    }
    Eigen::Vector4d b(j0[j].x(), j0[j].y(), j0[j].z(), 1.0);
    const Eigen::Matrix4d gram = A * A.transpose();
    const Eigen::VectorXd w = A.transpose() * gram.fullPivLu().solve(b);
    if ((A * w - b).norm() > 1e-9)
      throw std::runtime_error("joint regressor solve failed for joint " +
                               std::string(kJoints[j].name));
    for (int k = 0; k < K; ++k) m.regressor_[j].push_back({patch[k].second, w(k)});
  }

  // ------------------------------------------------------------------------
  // Shape displacement fields (orthogonalized) and the female morph.
  // ------------------------------------------------------------------------
  auto frame_weight = [&](int i, std::initializer_list<int> frames) {
    double s = 0.0;
    for (const auto& [f, w] : m.weights_[i])
      for (int q : frames)
        if (f == q) s += w;
    return s;
  };
  auto radial = [&](int i) {
    // Skin-weight-blended offset from the nearest point on each frame's axis.
    Vec3 r = Vec3::Zero();
    for (const auto& [f, w] : m.weights_[i]) {
      if (w == 0.0f) continue;
      double best = 1e9;
      Vec3 cp = Vec3::Zero();
      for (int c = 0; c < kNumCapsules; ++c) {
        if (m.capsules_[c].frame != f) continue;
        Vec3 q;
        const double d = point_segment_distance(m.verts0_[i], geom[c].a, geom[c].b, &q);
        if (d < best) {
          best = d;
          cp = q;
        }
      }
      if (best < 1e8) r += static_cast<double>(w) * (m.verts0_[i] - cp);
    }
    return r;
  };

  const std::initializer_list<int> kTorsoFrames = {0, 3, 9};
  const std::initializer_list<int> kLimbFrames = {1, 2, 4, 5, 7, 8, 16, 17, 18, 19, 20, 21};
  const std::initializer_list<int> kArmFrames = {16, 17, 18, 19, 20, 21};
  const std::initializer_list<int> kLegFrames = {1, 2, 4, 5, 7, 8};
  const std::initializer_list<int> kHeadFrames = {12, 15};

  for (int k = 0; k < kNumShape; ++k) m.blend_[k].assign(nv, Vec3::Zero());
  const Vec3 shoulder_l = j0[16], wrist_l = j0[20];
  const Vec3 arm_dir_l = (wrist_l - shoulder_l).normalized();
  const Vec3 head_c = j0[15] + Vec3(0, 0.09, 0.01);
  for (int i = 0; i < nv; ++i) {
    const Vec3& v = m.verts0_[i];
    const Vec3 rad = radial(i);
    const double mt = frame_weight(i, kTorsoFrames);
    const double ml = frame_weight(i, kLimbFrames);
    const double ma = frame_weight(i, kArmFrames);
    const double mg = frame_weight(i, kLegFrames);
    const double mh = frame_weight(i, kHeadFrames);
    m.blend_[0][i] = 0.023 * v;                               // overall size
    m.blend_[1][i] = Vec3(0, 0.020 * v.y(), 0);               // length
    m.blend_[2][i] = 0.030 * rad;                             // overall girth
    m.blend_[3][i] = 0.032 * mt * rad;                        // torso girth
    m.blend_[4][i] = 0.030 * ml * rad;                        // limb girth
    m.blend_[5][i] = Vec3(0, 0.020 * mg * (v.y() + 0.06), 0); // leg length
    {
      const Vec3 sh(v.x() > 0 ? shoulder_l.x() : -shoulder_l.x(), shoulder_l.y(), shoulder_l.z());
      const Vec3 dir(v.x() > 0 ? arm_dir_l.x() : -arm_dir_l.x(), arm_dir_l.y(), arm_dir_l.z());
      const double along = std::max(0.0, (v - sh).dot(dir));
      m.blend_[6][i] = 0.022 * ma * along * dir;              // arm length
    }
    {
      const double gy = std::exp(-std::pow((v.y() - 0.07) / 0.13, 2));
      const double gx = std::exp(-std::pow(v.x() / 0.13, 2));
      const double sz = 0.5 * (1.0 + std::tanh(v.z() / 0.04));
      m.blend_[7][i] = Vec3(0, 0, 0.042 * mt * gy * gx * sz); // belly
    }
    {
      const double band = std::exp(-std::pow((v.y() - 0.45) / 0.11, 2));
      m.blend_[8][i] = Vec3(0.020 * band * v.x(), 0, 0);      // shoulder width
    }
    m.blend_[9][i] = 0.020 * mh * (v - head_c);               // head size
  }
  // Gram-Schmidt over R^{3N}, preserving each field's original magnitude.
  auto dot_field = [&](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double s = 0.0;
    for (int i = 0; i < nv; ++i) s += a[i].dot(b[i]);
    return s;
  };
  for (int k = 0; k < kNumShape; ++k) {
    const double orig = std::sqrt(dot_field(m.blend_[k], m.blend_[k]));
    for (int p = 0; p < k; ++p) {
      const double proj = dot_field(m.blend_[k], m.blend_[p]) / dot_field(m.blend_[p], m.blend_[p]);
      for (int i = 0; i < nv; ++i) m.blend_[k][i] -= proj * m.blend_[p][i];
    }
    const double now = std::sqrt(dot_field(m.blend_[k], m.blend_[k]));
    if (now < 1e-6 * orig) throw std::runtime_error("degenerate shape field");
    for (int i = 0; i < nv; ++i) m.blend_[k][i] *= orig / now;
  }

  // Female morph: per-axis scale about the pelvis, wider hips, slimmer chest.
  m.gender_morph_.assign(nv, Vec3::Zero());
  for (int i = 0; i < nv; ++i) {
    const Vec3& v = m.verts0_[i];
    Vec3 f(v.x() * 0.93, v.y() * 0.95, v.z() * 0.95);
    const double hip_band = std::exp(-std::pow((v.y() + 0.18) / 0.22, 2));
    f.x() += 0.05 * v.x() * hip_band;
    const double chest_band = std::exp(-std::pow((v.y() - 0.32) / 0.12, 2));
    f -= 0.12 * chest_band * radial(i);
    m.gender_morph_[i] = f - v;
  }

  // Self-collision pair list: skip kinematically adjacent frames (tree
  // distance <= 2) and capsule pairs that interpenetrate at rest.
  for (int a = 0; a < kNumCapsules; ++a) {
    for (int b = a + 1; b < kNumCapsules; ++b) {
      const int fa = m.capsules_[a].frame, fb = m.capsules_[b].frame;
      int dist;
      {
        // Tree distance between frames (number of edges).
        int x = fa, y = fb;
        std::vector<int> ax, ay;
        while (x >= 0) {
          ax.push_back(x);
          x = m.parents_[x];
        }
        while (y >= 0) {
          ay.push_back(y);
          y = m.parents_[y];
        }
        dist = std::numeric_limits<int>::max();
        for (size_t p = 0; p < ax.size(); ++p)
          for (size_t q = 0; q < ay.size(); ++q)
            if (ax[p] == ay[q]) dist = std::min(dist, static_cast<int>(p + q));
      }
      if (dist <= 2) continue;
      // Pairs that already overlap (or nearly so) in the rest pose are part
      // of the union volume itself and can never signal a real collision.
      const double rest_gap = segment_distance(geom[a].a, geom[a].b, geom[b].a, geom[b].b) -
                              (geom[a].r + geom[b].r);
      if (rest_gap < 0.005) continue;
      m.collision_pairs_.push_back({a, b});
    }
  }

  m.validate();

  Eigen::Matrix<double, kNumShape, 1> zero = Eigen::Matrix<double, kNumShape, 1>::Zero();
  m.ref_volume_male_ = mesh_volume(TriMesh{m.shaped_vertices(zero, kMale), m.faces_}).volume;
  m.ref_volume_female_ = mesh_volume(TriMesh{m.shaped_vertices(zero, kFemale), m.faces_}).volume;
  m.ref_volume_neutral_ = mesh_volume(TriMesh{m.shaped_vertices(zero, kNeutral), m.faces_}).volume;
  m.cap_volume0_male_ = m.capsule_rest_volumes(zero, kMale);
  m.cap_volume0_female_ = m.capsule_rest_volumes(zero, kFemale);
  m.cap_volume0_neutral_ = m.capsule_rest_volumes(zero, kNeutral);
  return m;
}

}  // namespace bedsim
