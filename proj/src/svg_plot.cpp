#include "upsilon/svg_plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace upsilon {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlotError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

PlotSpec parse_plot_spec(std::string_view text) {
  PlotSpec spec;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw PlotError("plot spec line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "x") spec.x_column = value;
    else if (key == "y") spec.y_column = value;
    else if (key == "series") spec.series_column = value;
    else if (key == "title") spec.title = value;
    else if (key == "x_label") spec.x_label = value;
    else if (key == "y_label") spec.y_label = value;
    else if (key == "log2_x") spec.log2_x = value == "true" || value == "1";
    else if (key.starts_with("filter.")) spec.filters.emplace_back(key.substr(7), value);
    else throw PlotError("plot spec line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return spec;
}

PlotSpec load_plot_spec(const std::filesystem::path& path) { return parse_plot_spec(read_file(path)); }

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw PlotError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw PlotError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                      " fields, found " + std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw PlotError("empty csv");
  return table;
}

std::vector<PlotSeries> aggregate_series(const CsvTable& table, const PlotSpec& spec) {
  const std::size_t xc = table.column(spec.x_column);
  const std::size_t yc = table.column(spec.y_column);
  const std::size_t sc = spec.series_column.empty() ? SIZE_MAX : table.column(spec.series_column);
  std::vector<std::pair<std::size_t, std::string>> filters;
  for (const auto& [col, value] : spec.filters) filters.emplace_back(table.column(col), value);
  const auto rt = std::find(table.header.begin(), table.header.end(), "row_type");
  const std::size_t rtc = rt == table.header.end() ? SIZE_MAX : static_cast<std::size_t>(rt - table.header.begin());

  std::vector<std::string> order;
  std::map<std::string, std::map<double, std::vector<double>>> groups;
  for (const auto& row : table.rows) {
    if (rtc != SIZE_MAX && row[rtc] != "cell") continue;
    if (!std::all_of(filters.begin(), filters.end(), [&](const auto& f) { return row[f.first] == f.second; })) continue;
    double x = 0.0;
    double y = 0.0;
    if (!parse_number(row[xc], x) || !parse_number(row[yc], y)) continue;
    const std::string name = sc == SIZE_MAX ? spec.y_column : row[sc];
    if (!groups.contains(name)) order.push_back(name);
    groups[name][x].push_back(y);
  }

  std::vector<PlotSeries> out;
  for (const auto& name : order) {
    PlotSeries s;
    s.name = name;
    for (const auto& [x, ys] : groups[name]) {
      const double n = static_cast<double>(ys.size());
      double mean = 0.0;
      for (double y : ys) mean += y;
      mean /= n;
      double var = 0.0;
      for (double y : ys) var += (y - mean) * (y - mean);
      s.x.push_back(x);
      s.mean.push_back(mean);
      s.std.push_back(ys.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  if (series.empty()) throw PlotError("nothing to plot");
  constexpr double W = 640, H = 420, L = 70, R = 170, T = 40, B = 55;
  const auto tx = [&](double x) { return spec.log2_x ? std::log2(x) : x; };

  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (spec.log2_x && s.x[i] <= 0) throw PlotError("log2_x needs positive x values");
      x_lo = std::min(x_lo, tx(s.x[i]));
      x_hi = std::max(x_hi, tx(s.x[i]));
      y_lo = std::min(y_lo, s.mean[i] - s.std[i]);
      y_hi = std::max(y_hi, s.mean[i] + s.std[i]);
    }
  }
  if (!std::isfinite(x_lo)) throw PlotError("nothing to plot");
  if (x_hi == x_lo) { x_lo -= 0.5; x_hi += 0.5; }
  if (y_hi == y_lo) { y_lo -= 0.5; y_hi += 0.5; }
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;
  const auto px = [&](double x) { return L + (tx(x) - x_lo) / (x_hi - x_lo) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y_lo) / (y_hi - y_lo) * (H - T - B); };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / 4.0;
    const double fy = y_lo + (y_hi - y_lo) * i / 4.0;
    const double sx = L + (W - L - R) * i / 4.0;
    const double sy = py(fy);
    std::ostringstream lx;
    lx << std::setprecision(4) << (spec.log2_x ? std::exp2(fx) : fx);
    std::ostringstream ly;
    ly << std::setprecision(4) << fy;
    os << "<text x=\"" << sx << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << lx.str() << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << ly.str() << "</text>\n";
  }
  if (!spec.title.empty())
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
       << escape(spec.title) << "</text>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << escape(spec.x_label.empty() ? spec.x_column : spec.x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(spec.y_label.empty() ? spec.y_column : spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<g class=\"series\" data-name=\"" << escape(s.name) << "\">\n";
    os << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.mean[i] + s.std[i]) << ' ';
    for (std::size_t i = s.x.size(); i-- > 0;) os << px(s.x[i]) << ',' << py(s.mean[i] - s.std[i]) << ' ';
    os << "\"/>\n";
    os << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.mean[i]) << ' ';
    os << "\"/>\n</g>\n";
    const double ly = T + 10 + 20.0 * static_cast<double>(k);
    os << "<g class=\"legend\"><line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 40
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << W - R + 46
       << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text></g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void plot_csv(const std::filesystem::path& csv_path, const PlotSpec& spec, const std::filesystem::path& out_path) {
  const auto table = parse_csv(read_file(csv_path));
  if (table.rows.empty()) throw PlotError(csv_path.string() + " has no data rows");
  const auto svg = render_svg(aggregate_series(table, spec), spec);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw PlotError("cannot write " + out_path.string());
  out << svg;
}

}  // namespace upsilon
