#include "bedsim/recon.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bedsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

HeightField raster_over_mat(const TriMesh& mesh, const BedScene& scene, int subdiv) {
  if (subdiv < 1) throw std::invalid_argument("recon: subdiv must be >= 1");
  return rasterize_heightfield(mesh, scene.taxel_rows * subdiv,
                               scene.taxel_cols * subdiv, 0.0, 0.0,
                               scene.taxel_dx() / subdiv, scene.taxel_dy() / subdiv);
}

void push_face_grad(ReconMap& map, const TriMesh& mesh, int taxel, int face,
                    const Vec3& bary, double scale) {
  for (int k = 0; k < 3; ++k)
    map.dvertex_z.push_back({taxel, mesh.faces[face][k], scale * bary[k]});
}

}  // namespace

FloatGrid ReconMap::to_grid() const {
  FloatGrid g(rows, cols, kind);
  for (size_t i = 0; i < value.size(); ++i) g.data[i] = static_cast<float>(value[i]);
  return g;
}

ReconMap depth_recon(const TriMesh& mesh, const Camera& cam, const BedScene& scene,
                     int subdiv) {
  const HeightField hf = raster_over_mat(mesh, scene, subdiv);
  ReconMap map;
  map.rows = scene.taxel_rows;
  map.cols = scene.taxel_cols;
  map.kind = GridKind::kDepthRecon;
  map.value.assign(static_cast<size_t>(map.rows) * map.cols, 0.0);
  map.contact = FloatGrid(map.rows, map.cols, GridKind::kContact);
  const double cam_z = cam.position.z();
  for (int tr = 0; tr < map.rows; ++tr) {
    for (int tc = 0; tc < map.cols; ++tc) {
      double best = -kInf;
      int best_cell = -1;
      for (int dr = 0; dr < subdiv; ++dr) {
        for (int dc = 0; dc < subdiv; ++dc) {
          const int cell = hf.idx(tr * subdiv + dr, tc * subdiv + dc);
          if (hf.top_face[cell] < 0) continue;
          if (hf.top[cell] > best) {
            best = hf.top[cell];
            best_cell = cell;
          }
        }
      }
      if (best_cell < 0) continue;
      const int t = tr * map.cols + tc;
      map.value[t] = cam_z - best;
      map.contact.at(tr, tc) = 1.0f;
      push_face_grad(map, mesh, t, hf.top_face[best_cell], hf.top_bary[best_cell],
                     -1.0);
    }
  }
  return map;
}

ReconMap sink_recon(const TriMesh& mesh, double b, const BedScene& scene,
                    const Camera& cam, int subdiv) {
  if (b <= 0.0) throw std::invalid_argument("sink_recon: b must be positive");
  const HeightField hf = raster_over_mat(mesh, scene, subdiv);
  ReconMap map;
  map.rows = scene.taxel_rows;
  map.cols = scene.taxel_cols;
  map.kind = GridKind::kSinkRecon;
  map.value.assign(static_cast<size_t>(map.rows) * map.cols, 0.0);
  map.contact = FloatGrid(map.rows, map.cols, GridKind::kContact);
  const double surface_z = cam.position.z() - b;
  for (int tr = 0; tr < map.rows; ++tr) {
    for (int tc = 0; tc < map.cols; ++tc) {
      double low = kInf;
      int low_cell = -1;
      for (int dr = 0; dr < subdiv; ++dr) {
        for (int dc = 0; dc < subdiv; ++dc) {
          const int cell = hf.idx(tr * subdiv + dr, tc * subdiv + dc);
          if (hf.bottom_face[cell] < 0) continue;
          if (hf.bottom[cell] < low) {
            low = hf.bottom[cell];
            low_cell = cell;
          }
        }
      }
      if (low_cell < 0) continue;
      const double sink = surface_z - low;
      if (sink <= 0.0) continue;  // clamp: inactive side carries no gradient
      const int t = tr * map.cols + tc;
      map.value[t] = sink;
      map.contact.at(tr, tc) = 1.0f;
      push_face_grad(map, mesh, t, hf.bottom_face[low_cell], hf.bottom_bary[low_cell],
                     -1.0);
    }
  }
  return map;
}

ReconMap sink_recon(const TriMesh& mesh, double b, const BedScene& scene, int subdiv) {
  return sink_recon(mesh, b, scene, scene.camera(), subdiv);
}

PressureCal cal_fit(const std::vector<std::pair<ReconMap, FloatGrid>>& pairs) {
  if (pairs.size() < 4)
    throw std::invalid_argument("cal_fit: at least 4 training pairs required");
  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Matrix<double, 4, 1> atb = Eigen::Matrix<double, 4, 1>::Zero();
  for (const auto& [p_plus, target] : pairs) {
    if (target.rows != p_plus.rows || target.cols != p_plus.cols)
      throw std::invalid_argument("cal_fit: map/target shape mismatch");
    for (int r = 0; r < p_plus.rows; ++r) {
      for (int c = 0; c < p_plus.cols; ++c) {
        Eigen::Matrix<double, 4, 1> f;
        f << p_plus.at(r, c), (c + 0.5) / p_plus.cols, (r + 0.5) / p_plus.rows, 1.0;
        ata += f * f.transpose();
        atb += f * static_cast<double>(target.at(r, c));
      }
    }
  }
  Eigen::FullPivLU<Eigen::Matrix4d> lu(ata);
  if (lu.rank() < 4)
    throw std::runtime_error("cal_fit: rank-deficient feature system");
  PressureCal model;
  model.coeff = lu.solve(atb);
  double sq = 0.0;
  size_t n = 0;
  for (const auto& [p_plus, target] : pairs) {
    for (int r = 0; r < p_plus.rows; ++r) {
      for (int c = 0; c < p_plus.cols; ++c) {
        const double pred =
            std::max(0.0, model.coeff[0] * p_plus.at(r, c) +
                              model.coeff[1] * (c + 0.5) / p_plus.cols +
                              model.coeff[2] * (r + 0.5) / p_plus.rows +
                              model.coeff[3]);
        const double d = pred - target.at(r, c);
        sq += d * d;
        ++n;
      }
    }
  }
  model.train_mse = sq / static_cast<double>(n);
  return model;
}

PressureGrid cal_apply(const PressureCal& model, const ReconMap& p_plus,
                       const BedScene& scene) {
  PressureGrid out;
  out.grid = FloatGrid(p_plus.rows, p_plus.cols, GridKind::kPressure);
  out.taxel_area = scene.taxel_area();
  out.normalized = false;
  for (int r = 0; r < p_plus.rows; ++r) {
    for (int c = 0; c < p_plus.cols; ++c) {
      const double pred = model.coeff[0] * p_plus.at(r, c) +
                          model.coeff[1] * (c + 0.5) / p_plus.cols +
                          model.coeff[2] * (r + 0.5) / p_plus.rows + model.coeff[3];
      out.grid.at(r, c) = static_cast<float>(std::max(0.0, pred));
    }
  }
  return out;
}

}  // namespace bedsim
