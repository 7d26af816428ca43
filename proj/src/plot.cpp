#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fire/diagnostics.hpp"

namespace fire {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;

const std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v, int precision = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Piecewise-linear approximation of a perceptual blue-to-yellow map.
std::string colour(double t) {
  static const std::array<std::array<double, 3>, 5> stops = {{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * (stops.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(i);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
}

}  // namespace

std::string line_plot_svg(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                          const std::string& y_label) {
  double lo = INFINITY, hi = -INFINITY;
  std::size_t len = 0;
  for (const auto& s : series) {
    len = std::max(len, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double xmax = len > 1 ? static_cast<double>(len - 1) : 1.0;
  auto px = [&](double i) { return kLeft + pw * i / xmax; };
  auto py = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  header(os, title);
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    os << "<line x1=\"" << kLeft - 4 << "\" x2=\"" << kLeft << "\" y1=\"" << py(v) << "\" y2=\"" << py(v)
       << "\" stroke=\"#444\"/><text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4
       << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    const double i = xmax * t / 4.0;
    os << "<text x=\"" << px(i) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << num(i, 3)
       << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n"
     << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = kPalette[s % kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\"";
    if (series[s].dashed) os << " stroke-dasharray=\"6 4\"";
    os << " points=\"";
    for (std::size_t i = 0; i < series[s].values.size(); ++i) {
      const double v = series[s].values[i];
      if (!std::isfinite(v)) continue;
      os << px(static_cast<double>(i)) << ',' << py(v) << ' ';
    }
    os << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << kWidth - kRight + 12 << "\" x2=\"" << kWidth - kRight + 36 << "\" y1=\"" << ly
       << "\" y2=\"" << ly << "\" stroke=\"" << c << "\" stroke-width=\"2\""
       << (series[s].dashed ? " stroke-dasharray=\"6 4\"" : "") << "/><text x=\"" << kWidth - kRight + 42
       << "\" y=\"" << ly + 4 << "\">" << escape(series[s].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heatmap_svg(const ProbeResult& result, const std::string& title) {
  const std::size_t rows = result.sigma_blur.size(), cols = result.sigma_noise.size();
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& row : result.mean)
    for (double v : row) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!(lo <= hi)) lo = 0.0, hi = 1.0;
  const double span = hi - lo > 0.0 ? hi - lo : 1.0;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double cw = pw / std::max<std::size_t>(cols, 1), ch = ph / std::max<std::size_t>(rows, 1);

  std::ostringstream os;
  header(os, title);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = result.mean[r][c];
      const double x = kLeft + cw * static_cast<double>(c), y = kTop + ch * static_cast<double>(r);
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\""
         << colour((v - lo) / span) << "\"/><text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4
         << "\" text-anchor=\"middle\" fill=\"" << ((v - lo) / span > 0.6 ? "black" : "white") << "\">" << num(v, 3)
         << "</text>\n";
    }
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + ch * (static_cast<double>(r) + 0.5) + 4
       << "\" text-anchor=\"end\">" << num(result.sigma_blur[r], 3) << "</text>\n";
  }
  for (std::size_t c = 0; c < cols; ++c) {
    os << "<text x=\"" << kLeft + cw * (static_cast<double>(c) + 0.5) << "\" y=\"" << kTop + ph + 16
       << "\" text-anchor=\"middle\">" << num(result.sigma_noise[c], 3) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">noise sigma</text>\n"
     << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << kTop + ph / 2 << ")\">blur sigma</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double f = t / 4.0;
    const double y = kTop + ph * (1.0 - f) - 12;
    os << "<rect x=\"" << kWidth - kRight + 20 << "\" y=\"" << y << "\" width=\"16\" height=\"12\" fill=\""
       << colour(f) << "\"/><text x=\"" << kWidth - kRight + 42 << "\" y=\"" << y + 10 << "\">"
       << num(lo + f * span, 3) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace fire
