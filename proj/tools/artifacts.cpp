#include "artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "isolab/errors.hpp"
#include "isolab/textio.hpp"

namespace isolab::cli {

std::string content_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash input file: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a:") + hex;
}

void Manifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << doc_.dump(2) << '\n';
}

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 440;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 55;

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  double scale(double v, double px_lo, double px_hi) const {
    const double t = (hi > lo) ? (v - lo) / (hi - lo) : 0.5;
    return px_lo + t * (px_hi - px_lo);
  }
};

Range nice_range(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = (lo == 0.0) ? 1.0 : std::abs(lo) * 0.1;
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.06;
  return {lo - pad, hi + pad};
}

}  // namespace

void svg_line_plot(const std::string& path, const std::string& title,
                   const std::string& x_label, const std::string& y_label,
                   const std::vector<Series>& series) {
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        xlo = xhi = x;
        ylo = yhi = y;
        first = false;
      }
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  }
  const Range xr = nice_range(xlo, xhi);
  const Range yr = nice_range(ylo, yhi);
  const double px0 = kMarginLeft, px1 = kWidth - kMarginRight;
  const double py0 = kHeight - kMarginBottom, py1 = kMarginTop;  // y grows upward

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write plot: " + path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
      << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(title) << "</text>\n";

  // axes
  out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1 << "\" y2=\""
      << py0 << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0 << "\" y2=\""
      << py1 << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double fx = xr.lo + (xr.hi - xr.lo) * t / 5.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * t / 5.0;
    const double px = xr.scale(fx, px0, px1);
    const double py = yr.scale(fy, py0, py1);
    out << "<line x1=\"" << format_fixed(px, 2) << "\" y1=\"" << py0 << "\" x2=\""
        << format_fixed(px, 2) << "\" y2=\"" << py0 + 5 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << format_fixed(px, 2) << "\" y=\"" << py0 + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_fixed(fx, 3) << "</text>\n"
        << "<line x1=\"" << px0 - 5 << "\" y1=\"" << format_fixed(py, 2) << "\" x2=\""
        << px0 << "\" y2=\"" << format_fixed(py, 2) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << px0 - 8 << "\" y=\"" << format_fixed(py + 4, 2)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_fixed(fy, 3) << "</text>\n";
  }
  out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << xml_escape(x_label) << "</text>\n"
      << "<text x=\"18\" y=\"" << (py0 + py1) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 "
      << (py0 + py1) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kSeriesColors[si % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (const auto& [x, y] : series[si].points)
      out << format_fixed(xr.scale(x, px0, px1), 2) << ','
          << format_fixed(yr.scale(y, py0, py1), 2) << ' ';
    out << "\"/>\n";
    for (const auto& [x, y] : series[si].points)
      out << "<circle cx=\"" << format_fixed(xr.scale(x, px0, px1), 2) << "\" cy=\""
          << format_fixed(yr.scale(y, py0, py1), 2) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    if (!series[si].name.empty()) {
      const double ly = kMarginTop + 16.0 * static_cast<double>(si);
      out << "<rect x=\"" << px1 - 120 << "\" y=\"" << ly - 9
          << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n"
          << "<text x=\"" << px1 - 105 << "\" y=\"" << ly
          << "\" font-family=\"sans-serif\" font-size=\"12\">"
          << xml_escape(series[si].name) << "</text>\n";
    }
  }
  out << "</svg>\n";
  if (!out) throw IoError("plot write failed: " + path);
}

namespace {

// Diverging blue-white-red, t in [-1, 1].
std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  int r, g, b;
  if (t < 0) {
    const double u = 1.0 + t;  // 0 at strong blue, 1 at white
    r = static_cast<int>(33 + (255 - 33) * u);
    g = static_cast<int>(102 + (255 - 102) * u);
    b = static_cast<int>(172 + (255 - 172) * u);
  } else {
    const double u = 1.0 - t;
    r = static_cast<int>(178 + (255 - 178) * u);
    g = static_cast<int>(24 + (255 - 24) * u);
    b = static_cast<int>(43 + (255 - 43) * u);
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

void svg_heatmap(const std::string& path, const std::string& title, const Matrix& values) {
  const std::size_t d = values.rows();
  double mx = 0.0;
  for (double v : values.values()) mx = std::max(mx, std::abs(v));
  if (mx == 0.0) mx = 1.0;

  const int cell = std::max(4, static_cast<int>(420 / std::max<std::size_t>(d, 1)));
  const int grid = cell * static_cast<int>(d);
  const int width = grid + 140;
  const int height = grid + 70;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write heatmap: " + path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << (40 + grid / 2) << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(title) << "</text>\n";

  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out << "<rect x=\"" << 40 + static_cast<int>(j) * cell << "\" y=\""
          << 40 + static_cast<int>(i) * cell << "\" width=\"" << cell << "\" height=\""
          << cell << "\" fill=\"" << diverging_color(values(i, j) / mx) << "\"/>\n";
  out << "<rect x=\"40\" y=\"40\" width=\"" << grid << "\" height=\"" << grid
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // color scale
  const int bar_x = grid + 70;
  for (int k = 0; k < 64; ++k) {
    const double t = 1.0 - 2.0 * k / 63.0;
    out << "<rect x=\"" << bar_x << "\" y=\"" << 40 + k * (grid / 64.0) << "\" width=\"16\" height=\""
        << format_fixed(grid / 64.0 + 0.5, 2) << "\" fill=\"" << diverging_color(t) << "\"/>\n";
  }
  out << "<text x=\"" << bar_x + 20 << "\" y=\"48\" font-family=\"sans-serif\" font-size=\"11\">"
      << format_fixed(mx, 3) << "</text>\n"
      << "<text x=\"" << bar_x + 20 << "\" y=\"" << 40 + grid
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_fixed(-mx, 3)
      << "</text>\n</svg>\n";
  if (!out) throw IoError("heatmap write failed: " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write csv: " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("csv write failed: " + path);
}

void write_matrix_csv(const std::string& path, const Matrix& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write csv: " + path);
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("csv write failed: " + path);
}

}  // namespace isolab::cli
