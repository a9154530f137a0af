#include "mntk/output.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mntk/errors.hpp"

namespace mntk {
namespace {

std::string optional_number(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

double parse_number(std::string_view text, std::size_t line, const std::filesystem::path& path) {
  if (text.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError(path.string() + ": bad number '" + std::string(text) + "' on line " +
                          std::to_string(line),
                      0);
  }
  return v;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (f * mag >= raw) return f * mag;
  return 10.0 * mag;
}

std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string format_number(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_field(fields[i]);
  }
  return line + "\n";
}

std::vector<std::string> parse_csv_row(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r' && c != '\n') {
      fields.back() += c;
    }
  }
  return fields;
}

std::string trajectory_csv(const Trajectory& records) {
  std::string out(kTrajectoryHeader);
  out += '\n';
  for (const auto& r : records) {
    out += csv_row({std::to_string(r.step), format_number(r.t), format_number(r.loss),
                    format_number(r.pseudo_loss), format_number(r.residual_norm),
                    format_number(r.max_displacement), format_number(r.lambda_min_H),
                    optional_number(r.lyapunov), optional_number(r.bound)});
  }
  return out;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader) throw FormatError(path.string() + ": unexpected header", 0);
  Trajectory records;
  std::size_t offset = line.size() + 1;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    const std::size_t start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    const auto f = parse_csv_row(line);
    if (f.size() != 9) {
      throw FormatError(path.string() + ": expected 9 fields on line " + std::to_string(lineno),
                        start);
    }
    TrajectoryRecord r;
    const double step = parse_number(f[0], lineno, path);
    if (!(std::isfinite(step) && step == std::floor(step))) {
      throw FormatError(path.string() + ": bad step on line " + std::to_string(lineno), start);
    }
    r.step = static_cast<long>(step);
    r.t = parse_number(f[1], lineno, path);
    r.loss = parse_number(f[2], lineno, path);
    r.pseudo_loss = parse_number(f[3], lineno, path);
    r.residual_norm = parse_number(f[4], lineno, path);
    r.max_displacement = parse_number(f[5], lineno, path);
    r.lambda_min_H = parse_number(f[6], lineno, path);
    if (!f[7].empty()) r.lyapunov = parse_number(f[7], lineno, path);
    if (!f[8].empty()) r.bound = parse_number(f[8], lineno, path);
    records.push_back(r);
  }
  return records;
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<SvgSeries>& series) {
  constexpr double W = 760, H = 480, left = 80, right = 190, top = 40, bottom = 56;
  const double pw = W - left - right, ph = H - top - bottom;

  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !(s.y[i] > 0.0) || !std::isfinite(s.y[i])) continue;
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0.1, y_hi = 1;
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  double d_lo = std::floor(std::log10(y_lo)), d_hi = std::ceil(std::log10(y_hi));
  if (d_hi <= d_lo) d_hi = d_lo + 1;

  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return top + (d_hi - std::log10(y)) / (d_hi - d_lo) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\""
    << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
    << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
    << "font-family=\"sans-serif\" font-size=\"15\">" << xml_escape(title) << "</text>\n";

  o << "<g font-family=\"sans-serif\" font-size=\"11\" stroke-width=\"1\">\n";
  const double stride = std::ceil((d_hi - d_lo) / 10.0);
  for (double dec = d_hi; dec >= d_lo; dec -= stride) {
    const double y = top + (d_hi - dec) / (d_hi - d_lo) * ph;
    o << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(left + pw)
      << "\" y2=\"" << fixed(y) << "\" stroke=\"#dddddd\"/>\n"
      << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(y + 4)
      << "\" text-anchor=\"end\">1e" << static_cast<int>(dec) << "</text>\n";
  }
  const double step = nice_step(x_hi - x_lo, 6);
  for (double x = std::ceil(x_lo / step) * step; x <= x_hi + 1e-9 * step; x += step) {
    o << "<line x1=\"" << fixed(px(x)) << "\" y1=\"" << fixed(top) << "\" x2=\"" << fixed(px(x))
      << "\" y2=\"" << fixed(top + ph) << "\" stroke=\"#eeeeee\"/>\n"
      << "<text x=\"" << fixed(px(x)) << "\" y=\"" << fixed(top + ph + 16)
      << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
  }
  o << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(pw)
    << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n"
    << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(H - 14)
    << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n"
    << "<text x=\"18\" y=\"" << fixed(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << fixed(top + ph / 2) << ")\">" << xml_escape(y_label) << "</text>\n</g>\n";

  for (const auto& s : series) {
    std::string points;
    auto flush = [&] {
      if (points.empty()) return;
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\""
        << fixed(s.stroke_width) << "\" stroke-opacity=\"" << fixed(s.opacity) << "\""
        << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"" << points << "\"/>\n";
      points.clear();
    };
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !(s.y[i] > 0.0) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      const double y = std::clamp(py(s.y[i]), top, top + ph);
      if (!points.empty()) points += ' ';
      points += fixed(px(s.x[i])) + "," + fixed(y);
    }
    flush();
  }

  double ly = top + 10;
  o << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (const auto& s : series) {
    if (!s.in_legend) continue;
    const double lx = left + pw + 14;
    o << "<line x1=\"" << fixed(lx) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(lx + 26)
      << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\""
      << fixed(s.stroke_width) << "\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n"
      << "<text x=\"" << fixed(lx + 32) << "\" y=\"" << fixed(ly + 4) << "\">" << xml_escape(s.label)
      << "</text>\n";
    ly += 18;
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace mntk
