#include "bedsim/pressure_synth.hpp"

#include <stdexcept>

namespace bedsim {

PressureGrid synthesize_pressure(const RestState& rest, const BedScene& scene) {
  if (!rest.stable)
    throw std::runtime_error("cannot synthesize pressure from an unstable rest state");
  const FloatGrid& pen = rest.penetration;
  if (pen.rows != scene.taxel_rows || pen.cols != scene.taxel_cols)
    throw std::invalid_argument("penetration grid does not match the scene");
  PressureGrid out;
  out.grid = FloatGrid(pen.rows, pen.cols, GridKind::kPressureRaw);
  for (size_t i = 0; i < pen.data.size(); ++i)
    out.grid.data[i] = static_cast<float>(scene.kappa * pen.data[i]);
  out.taxel_area = scene.taxel_area();
  out.normalized = false;
  return out;
}

PressureGrid normalize_by_mass(const PressureGrid& raw, double mass_kg) {
  if (!(mass_kg > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!(raw.taxel_area > 0.0)) throw std::invalid_argument("taxel area must be positive");
  double sum = 0.0;
  for (float v : raw.grid.data) sum += v;
  if (!(sum > 0.0))
    throw std::runtime_error("cannot mass-normalize an all-zero pressure image");
  // Values are kPa, so the integral carries a factor 1000 to newtons.
  const double factor = mass_kg * kGravity / (sum * 1000.0 * raw.taxel_area);
  PressureGrid out;
  out.grid = FloatGrid(raw.grid.rows, raw.grid.cols, GridKind::kPressure);
  for (size_t i = 0; i < raw.grid.data.size(); ++i)
    out.grid.data[i] = static_cast<float>(raw.grid.data[i] * factor);
  out.taxel_area = raw.taxel_area;
  out.normalized = true;
  return out;
}

FloatGrid contact_map(const FloatGrid& grid, float threshold) {
  FloatGrid out(grid.rows, grid.cols, GridKind::kContact);
  for (size_t i = 0; i < grid.data.size(); ++i)
    out.data[i] = grid.data[i] > threshold ? 1.0f : 0.0f;
  return out;
}

}  // namespace bedsim
