#include "tsmi/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tsmi/errors.hpp"

namespace tsmi {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 24, kTop = 28, kBottom = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace

std::string render_progressive_svg(const std::vector<SvgCurve>& curves) {
    if (curves.empty()) throw DimensionError("render_progressive_svg: no curves");
    double xmax = 1, ymin = 1e300, ymax = -1e300;
    std::set<std::size_t> ticks;
    for (const auto& c : curves) {
        for (const auto& [cp, crps] : c.points) {
            xmax = std::max(xmax, std::log2(1.0 + static_cast<double>(cp)));
            ymin = std::min(ymin, crps);
            ymax = std::max(ymax, crps);
            ticks.insert(cp);
        }
    }
    if (ymax <= ymin) ymax = ymin + 1;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](std::size_t cp) {
        return kLeft + plot_w * std::log2(1.0 + static_cast<double>(cp)) / xmax;
    };
    auto py = [&](double v) { return kTop + plot_h * (1.0 - (v - ymin) / (ymax - ymin)); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
       << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    // Axes.
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
       << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
       << kTop + plot_h << "\" stroke=\"black\"/>\n";
    // X ticks at the checkpoints.
    for (std::size_t cp : ticks) {
        const double x = px(cp);
        os << "<line x1=\"" << x << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << x << "\" y2=\""
           << kTop + plot_h + 5 << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << x << "\" y=\"" << kTop + plot_h + 18
           << "\" font-size=\"11\" text-anchor=\"middle\">" << cp << "</text>\n";
    }
    // Y ticks.
    for (int i = 0; i <= 4; ++i) {
        const double v = ymin + (ymax - ymin) * i / 4.0;
        const double y = py(v);
        os << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\""
           << y << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
           << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
    os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
       << "\" font-size=\"12\" text-anchor=\"middle\">features ablated</text>\n";
    os << "<text x=\"16\" y=\"" << kTop + plot_h / 2
       << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << kTop + plot_h / 2 << ")\">CRPS</text>\n";
    // Curves + legend.
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [cp, crps] : curves[i].points)
            os << fmt(px(cp)) << "," << fmt(py(crps)) << " ";
        os << "\"/>\n";
        const double ly = kTop + 16 * static_cast<double>(i);
        os << "<line x1=\"" << kLeft + plot_w - 110 << "\" y1=\"" << ly << "\" x2=\""
           << kLeft + plot_w - 90 << "\" y2=\"" << ly << "\" stroke=\"" << color
           << "\" stroke-width=\"2\"/>\n"
           << "<text x=\"" << kLeft + plot_w - 84 << "\" y=\"" << ly + 4
           << "\" font-size=\"11\">" << curves[i].label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_progressive_svg(const std::vector<SvgCurve>& curves, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("write_progressive_svg: cannot open " + path);
    out << render_progressive_svg(curves);
}

}  // namespace tsmi
