#include "bedsim/mesh.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace bedsim {

VolumeResult mesh_volume(const TriMesh& mesh) {
  VolumeResult res;
  res.watertight = is_watertight(mesh);
  double v6 = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    v6 += a.dot(b.cross(c));
  }
  res.volume = v6 / 6.0;
  return res;
}

bool is_watertight(const TriMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  std::map<std::pair<int, int>, int> directed;  // directed edge -> count
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      if (a < 0 || b < 0 || a >= n || b >= n || a == b) return false;
      if (++directed[{a, b}] > 1) return false;  // duplicate directed edge
    }
  }
  // Opposite winding: each directed edge must have its reverse present.
  for (const auto& [e, cnt] : directed) {
    (void)cnt;
    auto it = directed.find({e.second, e.first});
    if (it == directed.end()) return false;
  }
  return !mesh.faces.empty();
}

std::vector<double> vertex_adjacent_area(const TriMesh& mesh) {
  std::vector<double> sum(mesh.vertices.size(), 0.0);
  std::vector<int> cnt(mesh.vertices.size(), 0);
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double area = 0.5 * (b - a).cross(c - a).norm();
    for (int k = 0; k < 3; ++k) {
      sum[f[k]] += area;
      cnt[f[k]] += 1;
    }
  }
  for (size_t i = 0; i < sum.size(); ++i)
    if (cnt[i] > 0) sum[i] /= cnt[i];
  return sum;
}

void write_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  char line[160];
  for (const auto& v : mesh.vertices) {
    std::snprintf(line, sizeof(line), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    os << line;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(line, sizeof(line), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    os << line;
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

TriMesh read_obj(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  TriMesh mesh;
  std::string line;
  while (std::getline(is, line)) {
    if (line.size() < 2) continue;
    if (line[0] == 'v' && line[1] == ' ') {
      double x, y, z;
      if (std::sscanf(line.c_str() + 2, "%lg %lg %lg", &x, &y, &z) != 3)
        throw std::runtime_error("bad vertex line in " + path);
      mesh.vertices.emplace_back(x, y, z);
    } else if (line[0] == 'f' && line[1] == ' ') {
      // Accept "f a b c" and "f a/.. b/.. c/..".
      std::istringstream ss(line.substr(2));
      std::array<int, 3> f{};
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        if (!(ss >> tok)) throw std::runtime_error("bad face line in " + path);
        f[k] = std::atoi(tok.c_str()) - 1;
      }
      mesh.faces.push_back(f);
    }
  }
  return mesh;
}

TriMesh sheet_mesh(int rows, int cols, const std::vector<Vec3>& vertices) {
  if (static_cast<int>(vertices.size()) != rows * cols)
    throw std::invalid_argument("sheet_mesh: vertex count does not match rows*cols");
  TriMesh mesh;
  mesh.vertices = vertices;
  mesh.faces.reserve(static_cast<size_t>(rows - 1) * (cols - 1) * 2);
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int i00 = r * cols + c, i01 = i00 + 1;
      const int i10 = i00 + cols, i11 = i10 + 1;
      mesh.faces.push_back({i00, i01, i11});
      mesh.faces.push_back({i00, i11, i10});
    }
  }
  return mesh;
}

}  // namespace bedsim
