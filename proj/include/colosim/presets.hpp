#pragma once

#include <string>
#include <vector>

#include "colosim/simulator.hpp"

namespace colosim {

/// Named scenario presets for the two test systems. CASE1..CASE8 run the
/// 200 MVA aggregated system; CASE9 and CASE10 run the CHIL-style system,
/// CASE10 with three GFLC clusters.
ScenarioConfig case_preset(const std::string& name, bool vfdc_on = false);

std::vector<std::string> preset_names();

}  // namespace colosim
