#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tsmi {

struct SvgCurve {
    std::string label;
    std::vector<std::pair<std::size_t, double>> points;  // (features ablated, CRPS)
};

// Progressive-ablation overlay: one polyline per site, CRPS against the
// number of ablated features on a log-scaled x axis (baseline at 0 plotted
// at log2(1 + c)). Hand-emitted XML, no plotting dependency.
std::string render_progressive_svg(const std::vector<SvgCurve>& curves);

void write_progressive_svg(const std::vector<SvgCurve>& curves, const std::string& path);

}  // namespace tsmi
