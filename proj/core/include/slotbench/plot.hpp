#pragma once

#include <string>
#include <vector>

#include "slotbench/contact_sim.hpp"
#include "slotbench/insertion_env.hpp"
#include "slotbench/sac.hpp"

namespace slotbench {

/// Side view of the holder with the plate drawn at every `stride`-th state.
std::string trajectory_svg(const WorldGeometry& world, const PlateShape& plate,
                           const std::vector<BodyState>& states, const EpisodeStart& start,
                           int stride = 4);

/// Success rate and mean return against iteration.
std::string metrics_svg(const std::vector<IterationMetrics>& metrics);

}  // namespace slotbench
