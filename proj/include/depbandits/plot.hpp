#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "depbandits/errors.hpp"
#include "depbandits/output.hpp"

namespace depbandits {

struct PlotSeries {
  std::string policy;
  std::vector<AggregatePoint> points;
};

namespace detail {

inline std::vector<std::string_view> split_csv_row(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= line.size(); ++k)
    if (k == line.size() || line[k] == ',') {
      out.push_back(line.substr(start, k - start));
      start = k + 1;
    }
  return out;
}

template <typename T>
T parse_csv_field(std::string_view s, std::size_t row, const char* column) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw ConfigError("row " + std::to_string(row) + ": column " + column + " is not a number: '" + std::string(s) +
                      "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw ConfigError("row " + std::to_string(row) + ": column " + column + " is not finite");
  return v;
}

}  // namespace detail

/// Parses an aggregate CSV. Rows are numbered from 1 with the header as row 1.
/// Series keep the order in which policies first appear.
inline std::vector<PlotSeries> parse_aggregate_csv(std::string_view text) {
  std::vector<PlotSeries> out;
  std::size_t row = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header) {
      if (line != kAggregateHeader)
        throw ConfigError("row 1: expected header '" + std::string(kAggregateHeader) + "', got '" + std::string(line) +
                          "'");
      header = true;
      continue;
    }
    if (line.empty()) {
      if (pos >= text.size()) break;
      throw ConfigError("row " + std::to_string(row) + ": empty row");
    }
    auto f = detail::split_csv_row(line);
    if (f.size() != 5)
      throw ConfigError("row " + std::to_string(row) + ": expected 5 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ConfigError("row " + std::to_string(row) + ": empty policy name");
    AggregatePoint p;
    p.t = detail::parse_csv_field<std::uint64_t>(f[1], row, "t");
    p.mean = detail::parse_csv_field<double>(f[2], row, "mean");
    p.sd = detail::parse_csv_field<double>(f[3], row, "sd");
    p.ci95 = detail::parse_csv_field<double>(f[4], row, "ci95");
    if (p.sd < 0.0 || p.ci95 < 0.0) throw ConfigError("row " + std::to_string(row) + ": negative sd or ci95");
    auto it = std::find_if(out.begin(), out.end(), [&](const PlotSeries& s) { return s.policy == f[0]; });
    if (it == out.end()) {
      out.push_back({std::string(f[0]), {}});
      it = out.end() - 1;
    }
    if (!it->points.empty() && p.t <= it->points.back().t)
      throw ConfigError("row " + std::to_string(row) + ": rounds of policy " + it->policy + " must increase");
    it->points.push_back(p);
  }
  if (!header) throw ConfigError("empty CSV: no header row");
  if (out.empty()) throw ConfigError("CSV has a header but no data rows");
  return out;
}

namespace detail {

inline std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
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

/// Round step of roughly span/target in {1, 2, 5} x 10^k.
inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

}  // namespace detail

/// Static SVG of mean regret against t with shaded 95% bands, one colour per series.
inline std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title = "Regret") {
  constexpr double W = 720, H = 480, L = 80, R = 180, T = 40, B = 60;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  using detail::fmt;

  double tmax = 1.0, ymax = 0.0;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      tmax = std::max(tmax, static_cast<double>(p.t));
      ymax = std::max(ymax, p.mean + p.ci95);
    }
  if (!(ymax > 0.0)) ymax = 1.0;
  const double ystep = detail::nice_step(ymax, 5);
  ymax = std::ceil(ymax / ystep) * ystep;
  const double xstep = detail::nice_step(tmax, 5);

  const double pw = W - L - R, ph = H - T - B;
  auto X = [&](double t) { return fmt("%.2f", L + pw * t / tmax); };
  auto Y = [&](double y) { return fmt("%.2f", T + ph * (1.0 - y / ymax)); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" viewBox=\"0 0 720 480\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt("%.2f", L + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         detail::xml_escape(title) + "</text>\n";

  svg += "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (double y = 0.0; y <= ymax + 1e-9 * ymax; y += ystep)
    svg += "<line x1=\"" + X(0) + "\" y1=\"" + Y(y) + "\" x2=\"" + X(tmax) + "\" y2=\"" + Y(y) + "\"/>\n";
  svg += "</g>\n";

  svg += "<g text-anchor=\"end\">\n";
  for (double y = 0.0; y <= ymax + 1e-9 * ymax; y += ystep)
    svg += "<text x=\"" + fmt("%.2f", L - 6) + "\" y=\"" + fmt("%.2f", T + ph * (1.0 - y / ymax) + 4) + "\">" +
           fmt("%g", y) + "</text>\n";
  svg += "</g>\n<g text-anchor=\"middle\">\n";
  for (double t = 0.0; t <= tmax + 1e-9 * tmax; t += xstep)
    svg += "<text x=\"" + X(t) + "\" y=\"" + fmt("%.2f", T + ph + 18) + "\">" + fmt("%g", t) + "</text>\n";
  svg += "</g>\n";

  svg += "<line x1=\"" + X(0) + "\" y1=\"" + Y(0) + "\" x2=\"" + X(tmax) + "\" y2=\"" + Y(0) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + X(0) + "\" y1=\"" + Y(0) + "\" x2=\"" + X(0) + "\" y2=\"" + Y(ymax) +
         "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + fmt("%.2f", L + pw / 2) + "\" y=\"" + fmt("%.2f", H - 16) +
         "\" text-anchor=\"middle\">round t</text>\n";
  svg += "<text transform=\"translate(20 " + fmt("%.2f", T + ph / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">mean pseudo-regret</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = palette[k % std::size(palette)];
    std::string band, line;
    for (const auto& p : s.points) band += X(p.t) + "," + Y(p.mean + p.ci95) + " ";
    for (auto it = s.points.rbegin(); it != s.points.rend(); ++it)
      band += X(it->t) + "," + Y(std::max(0.0, it->mean - it->ci95)) + " ";
    for (const auto& p : s.points) line += X(p.t) + "," + Y(p.mean) + " ";
    band.pop_back();
    line.pop_back();
    svg += "<g class=\"series\" data-policy=\"" + detail::xml_escape(s.policy) + "\">\n";
    svg += "<polygon points=\"" + band + "\" fill=\"" + colour + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    svg += "</g>\n";
  }

  svg += "<g class=\"legend\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = T + 10 + 22.0 * static_cast<double>(k);
    const char* colour = palette[k % std::size(palette)];
    svg += "<line x1=\"" + fmt("%.2f", W - R + 16) + "\" y1=\"" + fmt("%.2f", y) + "\" x2=\"" +
           fmt("%.2f", W - R + 40) + "\" y2=\"" + fmt("%.2f", y) + "\" stroke=\"" + colour +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt("%.2f", W - R + 46) + "\" y=\"" + fmt("%.2f", y + 4) + "\">" +
           detail::xml_escape(series[k].policy) + "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace depbandits
