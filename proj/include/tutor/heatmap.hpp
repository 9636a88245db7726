#pragma once

#include <string>
#include <vector>

namespace tutor::motion {

// Renders a matrix as a PNG heatmap (one colored cell per entry, upscaled).
// Labels are only used to size the image consistently; values are mapped to a
// blue-to-red ramp over [min, max].
void write_heatmap_png(const std::string& path, const std::vector<std::vector<double>>& values,
                       const std::vector<std::string>& labels, int cell_px = 32);

}  // namespace tutor::motion
