#include "slotbench/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace slotbench {

namespace {

struct Frame {
  double x0, x1, z0, z1;  // world window
  double width, height;   // pixels

  double px(double x) const { return (x - x0) / (x1 - x0) * width; }
  double pz(double z) const { return height - (z - z0) / (z1 - z0) * height; }
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(5);
  os << v;
  return os.str();
}

}  // namespace

std::string trajectory_svg(const WorldGeometry& world, const PlateShape& plate,
                           const std::vector<BodyState>& states, const EpisodeStart& start,
                           int stride) {
  const double cx = world.slot_centers_x.empty() ? 0.0 : world.slot_centers_x[world.slot_centers_x.size() / 2];
  const Frame f{cx - 0.3, cx + 0.3, -0.05, 0.55, 600.0, 600.0};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
     << f.height << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto box = [&](const Box& b, const char* fill) {
    const double x = f.px(std::max(b.min_x(), f.x0));
    const double w = f.px(std::min(b.max_x(), f.x1)) - x;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(f.pz(b.max_z())) << "\" width=\"" << num(w)
       << "\" height=\"" << num(f.pz(b.min_z()) - f.pz(b.max_z())) << "\" fill=\"" << fill
       << "\"/>\n";
  };
  for (const Box& b : world.boxes) box(b, "#777");
  if (world.blocker) box(*world.blocker, "#c0392b");

  auto marker = [&](const Pose2& ee, const char* color) {
    const Pose2 p = plate_pose(ee, plate);
    const auto [bx, bz] = p.apply(0.0, -plate.half_height);
    os << "<circle cx=\"" << num(f.px(bx)) << "\" cy=\"" << num(f.pz(bz)) << "\" r=\"4\" fill=\""
       << color << "\"/>\n";
  };
  marker(start.true_goal, "#27ae60");
  marker(start.noisy_goal, "#f39c12");

  stride = std::max(stride, 1);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != states.size()) continue;
    const auto corners = plate_corners(states[i].pose, plate);
    const double shade = states.size() > 1 ? static_cast<double>(i) / (states.size() - 1) : 1.0;
    os << "<polygon fill=\"none\" stroke=\"rgb(" << static_cast<int>(40 + 180 * (1 - shade)) << ','
       << static_cast<int>(90 + 120 * (1 - shade)) << ",220)\" stroke-width=\"1\" points=\"";
    for (const auto& [x, z] : corners) os << num(f.px(x)) << ',' << num(f.pz(z)) << ' ';
    os << "\"/>\n";
  }
  os << "<polyline fill=\"none\" stroke=\"#2c3e50\" stroke-width=\"1.5\" points=\"";
  for (const BodyState& s : states) os << num(f.px(s.pose.x())) << ',' << num(f.pz(s.pose.z())) << ' ';
  os << "\"/>\n</svg>\n";
  return os.str();
}

std::string metrics_svg(const std::vector<IterationMetrics>& metrics) {
  const double w = 640.0;
  const double h = 320.0;
  const double pad = 40.0;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\""
     << h - pad << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
     << "\" stroke=\"black\"/>\n";
  if (!metrics.empty()) {
    const double n = static_cast<double>(std::max<std::size_t>(metrics.size() - 1, 1));
    double rmin = std::numeric_limits<double>::infinity();
    double rmax = -rmin;
    for (const IterationMetrics& m : metrics) {
      rmin = std::min(rmin, m.mean_return);
      rmax = std::max(rmax, m.mean_return);
    }
    if (!(rmax > rmin)) rmax = rmin + 1.0;
    auto series = [&](auto value, double lo, double hi, const char* color) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      for (std::size_t i = 0; i < metrics.size(); ++i) {
        const double x = pad + (w - 2 * pad) * static_cast<double>(i) / n;
        const double y = h - pad - (h - 2 * pad) * (value(metrics[i]) - lo) / (hi - lo);
        os << num(x) << ',' << num(y) << ' ';
      }
      os << "\"/>\n";
    };
    series([](const IterationMetrics& m) { return m.success_rate; }, 0.0, 1.0, "#27ae60");
    series([](const IterationMetrics& m) { return m.mean_return; }, rmin, rmax, "#2980b9");
    os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"12\" fill=\"#27ae60\">success rate [0, 1]</text>\n"
       << "<text x=\"" << w / 2 << "\" y=\"20\" font-size=\"12\" fill=\"#2980b9\">mean return ["
       << num(rmin) << ", " << num(rmax) << "]</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace slotbench
