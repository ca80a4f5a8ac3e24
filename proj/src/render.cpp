#include "aemcarl/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace aemcarl::render {

namespace {

constexpr double kMargin = 1.0;  // m around the scene

struct Frame {
  double x0, y0, x1, y1, scale;
  double sx(double x) const { return (x - x0) * scale; }
  double sy(double y) const { return (y1 - y) * scale; }  // svg y points down
};

Frame bounds(const eval::EpisodeRecord& record, const RenderOptions& opt) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  const auto grow = [&](double x, double y, double r) {
    x0 = std::min(x0, x - r);
    y0 = std::min(y0, y - r);
    x1 = std::max(x1, x + r);
    y1 = std::max(y1, y + r);
  };
  for (const auto& s : record.frames) {
    grow(s.robot.px, s.robot.py, s.robot.radius);
    grow(s.robot.gx, s.robot.gy, 0.0);
    for (const auto& o : s.obstacles) grow(o.px, o.py, o.radius);
  }
  return {x0 - kMargin, y0 - kMargin, x1 + kMargin, y1 + kMargin, opt.pixels_per_meter};
}

// Blue (low) to red (high).
std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 * t));
  const int b = static_cast<int>(std::lround(255 * (1.0 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, 64, b);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void write_svg(std::ostream& out, const eval::EpisodeRecord& record, const RenderOptions& opt) {
  if (record.frames.empty()) throw std::invalid_argument("render: empty episode record");
  const Frame f = bounds(record, opt);
  out.precision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (f.x1 - f.x0) * f.scale << "\" height=\""
      << (f.y1 - f.y0) * f.scale << "\">\n";
  out << "<rect class=\"background\" x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (opt.heatmap != nullptr && !opt.heatmap->empty()) {
    const auto& field = *opt.heatmap;
    double peak = 0.0;
    for (std::int64_t iy = 0; iy < field.height(); ++iy) {
      for (std::int64_t ix = 0; ix < field.width(); ++ix) {
        peak = std::max(peak, field.at(field.min_ix() + ix, field.min_iy() + iy));
      }
    }
    const double res = field.resolution();
    out << "<g class=\"heatmap\">\n";
    out << std::setprecision(17);
    for (std::int64_t iy = field.min_iy(); iy < field.min_iy() + field.height(); ++iy) {
      for (std::int64_t ix = field.min_ix(); ix < field.min_ix() + field.width(); ++ix) {
        const double v = field.at(ix, iy);
        if (v == 0.0) continue;
        const Vec2 c = field.cell_center(ix, iy);
        out << "<rect class=\"cell\" data-ix=\"" << ix << "\" data-iy=\"" << iy << "\" data-value=\"" << v
            << "\" x=\"" << f.sx(c.x - res / 2) << "\" y=\"" << f.sy(c.y + res / 2) << "\" width=\""
            << res * f.scale << "\" height=\"" << res * f.scale << "\" fill=\"" << heat_color(v / peak)
            << "\" fill-opacity=\"0.6\"/>\n";
      }
    }
    out << std::setprecision(6) << "</g>\n";
  }

  // Trajectories.
  const std::size_t n_obs = record.frames.front().obstacles.size();
  for (std::size_t agent = 0; agent <= n_obs; ++agent) {
    out << "<polyline class=\"trajectory\" fill=\"none\" stroke=\""
        << (agent == 0 ? "#000000" : kPalette[(agent - 1) % 10]) << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& s : record.frames) {
      const Vec2 p = agent == 0 ? s.robot.position() : s.obstacles[agent - 1].position();
      out << f.sx(p.x) << ',' << f.sy(p.y) << ' ';
    }
    out << "\"/>\n";
  }

  // Goal star.
  const auto& robot0 = record.frames.front().robot;
  out << "<polygon class=\"goal\" fill=\"gold\" stroke=\"black\" points=\"";
  for (int k = 0; k < 10; ++k) {
    const double r = (k % 2 == 0 ? 0.3 : 0.12);
    const double a = M_PI / 2 + k * M_PI / 5;
    out << f.sx(robot0.gx + r * std::cos(a)) << ',' << f.sy(robot0.gy + r * std::sin(a)) << ' ';
  }
  out << "\"/>\n";

  // Discs at keyframes.
  const auto discs = [&](std::size_t idx, double opacity) {
    const auto& s = record.frames[idx];
    out << "<circle class=\"robot\" data-step=\"" << idx << "\" cx=\"" << f.sx(s.robot.px) << "\" cy=\""
        << f.sy(s.robot.py) << "\" r=\"" << s.robot.radius * f.scale << "\" fill=\"#000000\" fill-opacity=\""
        << opacity << "\"/>\n";
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
      const auto& o = s.obstacles[i];
      out << "<circle class=\"obstacle\" data-step=\"" << idx << "\" cx=\"" << f.sx(o.px) << "\" cy=\""
          << f.sy(o.py) << "\" r=\"" << o.radius * f.scale << "\" fill=\"" << kPalette[i % 10]
          << "\" fill-opacity=\"" << opacity << "\"/>\n";
    }
  };
  const std::size_t last = record.frames.size() - 1;
  if (opt.keyframe_every > 0) {
    const auto every = static_cast<std::size_t>(opt.keyframe_every);
    for (std::size_t t = every; t < last; t += every) discs(t, 0.35);
  }
  discs(last, 0.9);
  out << "</svg>\n";
}

void render_episode(const eval::EpisodeRecord& record, const std::string& path, const RenderOptions& options) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write render to '" + path + "'");
  write_svg(out, record, options);
  if (!out) throw std::runtime_error("failed writing render to '" + path + "'");
}

}  // namespace aemcarl::render
