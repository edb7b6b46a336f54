#pragma once

#include "bedsim/grid.hpp"
#include "bedsim/rest_sim.hpp"
#include "bedsim/scene.hpp"

namespace bedsim {

// Raw pressure image from a settled state: kappa * sensing-gap penetration
// per taxel, in kPa. Throws when the state is not stable.
PressureGrid synthesize_pressure(const RestState& rest, const BedScene& scene);

// Mass normalization: rescales so the image integrates the body weight,
// sum(p_kPa) * 1000 * A_t == m * g. Throws when the input sums to zero.
PressureGrid normalize_by_mass(const PressureGrid& raw, double mass_kg);

// Binary map of taxels with value strictly above the threshold.
FloatGrid contact_map(const FloatGrid& grid, float threshold = 0.0f);

}  // namespace bedsim
