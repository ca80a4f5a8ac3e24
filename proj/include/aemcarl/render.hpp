#pragma once

#include <iosfwd>
#include <string>

#include "aemcarl/eval.hpp"
#include "aemcarl/reward.hpp"

namespace aemcarl::render {

struct RenderOptions {
  // Discs are drawn at every `keyframe_every`-th step and at the final
  // frame; 0 draws the final frame only. The initial frame gets no discs.
  int keyframe_every = 0;
  double pixels_per_meter = 50.0;
  const reward::RewardField* heatmap = nullptr;  // optional underlay
};

// Static SVG: trajectory polylines, agent discs (<circle>), the robot goal as
// a star (<polygon class="goal">) and heatmap cells (<rect class="cell">,
// with data-ix / data-iy / data-value attributes).
void write_svg(std::ostream& out, const eval::EpisodeRecord& record, const RenderOptions& options = {});

// Throws std::runtime_error when the path cannot be written.
void render_episode(const eval::EpisodeRecord& record, const std::string& path,
                    const RenderOptions& options = {});

}  // namespace aemcarl::render
