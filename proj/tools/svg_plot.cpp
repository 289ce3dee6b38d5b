#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <sstream>

#include "hybstab/serialize.hpp"

namespace hybstab::cli {

std::string probe_svg(const hybstab::ProbeResult& probe, bool reproducible) {
  const double W = 480, H = 480, pad = 48;
  double lo = 1e300, hi = -1e300;
  for (const auto& pt : probe.points) {
    if (!pt.pi_s) continue;
    lo = std::min({lo, pt.s, *pt.pi_s});
    hi = std::max({hi, pt.s, *pt.pi_s});
  }
  if (!(lo < hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  const double margin = 0.05 * (hi - lo);
  lo -= margin;
  hi += margin;
  auto X = [&](double v) { return pad + (v - lo) / (hi - lo) * (W - 2 * pad); };
  auto Y = [&](double v) { return H - pad - (v - lo) / (hi - lo) * (H - 2 * pad); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  if (!reproducible) {
    const std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    svg << "<!-- generated " << buf << " -->\n";
  }
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  svg << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\""
      << H - pad << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << pad << "\" y2=\"" << pad
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" font-size=\"12\" text-anchor=\"middle\">s</text>\n";
  svg << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"12\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 14 " << H / 2 << ")\">pi(s)</text>\n";
  svg << "<text x=\"" << pad << "\" y=\"" << H - pad + 16 << "\" font-size=\"10\">"
      << format_g17(lo + margin) << "</text>\n";
  svg << "<text x=\"" << W - pad << "\" y=\"" << H - pad + 16
      << "\" font-size=\"10\" text-anchor=\"end\">" << format_g17(hi - margin) << "</text>\n";
  // diagonal
  svg << "<line x1=\"" << X(lo) << "\" y1=\"" << Y(lo) << "\" x2=\"" << X(hi) << "\" y2=\""
      << Y(hi) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  // polyline through the defined points
  svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (const auto& pt : probe.points) {
    if (!pt.pi_s) continue;
    svg << X(pt.s) << ',' << Y(*pt.pi_s) << ' ';
  }
  svg << "\"/>\n";
  for (const auto& pt : probe.points) {
    if (!pt.pi_s) continue;
    svg << "<circle cx=\"" << X(pt.s) << "\" cy=\"" << Y(*pt.pi_s)
        << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }
  svg << "<text x=\"" << W - pad << "\" y=\"" << pad << "\" font-size=\"12\" text-anchor=\"end\">"
      << "verdict: " << probe_verdict_name(probe.verdict) << (probe.degenerate ? " (degenerate)" : "")
      << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace hybstab::cli
