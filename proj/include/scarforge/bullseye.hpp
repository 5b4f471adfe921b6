#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "scarforge/aha.hpp"
#include "scarforge/errors.hpp"

namespace scarforge {

namespace detail {

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string svg_point(double x, double y) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.2f,%.2f", x, y);
  return buf;
}

// Annular sector wedge between radii r0 < r1 spanning [a0, a1] radians.
inline std::string wedge_path(double cx, double cy, double r0, double r1, double a0, double a1) {
  const double x0o = cx + r1 * std::cos(a0), y0o = cy + r1 * std::sin(a0);
  const double x1o = cx + r1 * std::cos(a1), y1o = cy + r1 * std::sin(a1);
  const double x1i = cx + r0 * std::cos(a1), y1i = cy + r0 * std::sin(a1);
  const double x0i = cx + r0 * std::cos(a0), y0i = cy + r0 * std::sin(a0);
  std::string p = "M" + svg_point(x0o, y0o);
  p += " A" + svg_point(r1, r1) + " 0 0 1 " + svg_point(x1o, y1o);
  p += " L" + svg_point(x1i, y1i);
  p += " A" + svg_point(r0, r0) + " 0 0 0 " + svg_point(x0i, y0i);
  p += " Z";
  return p;
}

inline std::string shade(double value, double vmax) {
  const double frac = vmax > 0.0 ? value / vmax : 0.0;
  const int level = 255 - static_cast<int>(std::lround(165.0 * std::min(1.0, std::max(0.0, frac))));
  char buf[40];
  std::snprintf(buf, sizeof(buf), "rgb(%d,%d,255)", level, level);
  return buf;
}

}  // namespace detail

inline void bullseye_csv(const BullseyeTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "bullseye_csv: cannot open " + path);
  out << "segment_id,name,value\n";
  for (int s = 1; s <= 17; ++s) {
    out << s << ',' << segment_name(s) << ',' << detail::fixed2(table.values[static_cast<std::size_t>(s - 1)])
        << '\n';
  }
  out << "0,Outside," << detail::fixed2(table.outside) << '\n';
  if (!out) fail(ErrorCode::IoFailure, "bullseye_csv: write failed for " + path);
}

// Deterministic bull's-eye plot: basal ring outermost (segments 1-6), mid
// ring (7-12), apical ring (13-16), apex disk (17). Each cell carries its
// value to two decimals. Output depends only on the table contents.
inline void bullseye_svg(const BullseyeTable& table, const std::string& path) {
  const double cx = 220.0, cy = 220.0;
  const double radii[4] = {55.0, 110.0, 160.0, 210.0};  // apex, apical, mid, basal outer radii
  double vmax = std::abs(table.outside);
  for (double v : table.values) vmax = std::max(vmax, std::abs(v));

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"440\" height=\"440\" "
         "viewBox=\"0 0 440 440\">\n";
  svg += "<rect width=\"440\" height=\"440\" fill=\"white\"/>\n";

  auto value_of = [&](int seg) { return table.values[static_cast<std::size_t>(seg - 1)]; };
  auto cell = [&](int seg, const std::string& shape_markup, double tx, double ty) {
    svg += "<g id=\"seg" + std::to_string(seg) + "\">\n";
    svg += shape_markup;
    svg += "<text x=\"" + detail::fixed2(tx) + "\" y=\"" + detail::fixed2(ty) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
           "dominant-baseline=\"middle\" fill=\"black\">" +
           detail::fixed2(value_of(seg)) + "</text>\n";
    svg += "</g>\n";
  };

  struct RingLayout {
    int first_seg;
    int sectors;
    double r0, r1;
  };
  // Segment 1 of each ring starts at 12 o'clock and cells advance clockwise
  // in screen coordinates.
  const RingLayout rings[3] = {{1, 6, radii[2], radii[3]},
                               {7, 6, radii[1], radii[2]},
                               {13, 4, radii[0], radii[1]}};
  for (const auto& ring : rings) {
    const double width = 2.0 * M_PI / ring.sectors;
    for (int m = 0; m < ring.sectors; ++m) {
      const int seg = ring.first_seg + m;
      const double a0 = -M_PI / 2.0 + m * width;
      const double a1 = a0 + width;
      const double am = a0 + 0.5 * width;
      const double rm = 0.5 * (ring.r0 + ring.r1);
      std::string shape = "<path d=\"" + detail::wedge_path(cx, cy, ring.r0, ring.r1, a0, a1) +
                          "\" fill=\"" + detail::shade(value_of(seg), vmax) +
                          "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
      cell(seg, shape, cx + rm * std::cos(am), cy + rm * std::sin(am));
    }
  }
  std::string apex_shape = "<circle cx=\"" + detail::fixed2(cx) + "\" cy=\"" + detail::fixed2(cy) +
                           "\" r=\"" + detail::fixed2(radii[0]) + "\" fill=\"" +
                           detail::shade(value_of(17), vmax) +
                           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  cell(17, apex_shape, cx, cy);
  svg += "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "bullseye_svg: cannot open " + path);
  out << svg;
  if (!out) fail(ErrorCode::IoFailure, "bullseye_svg: write failed for " + path);
}

}  // namespace scarforge
