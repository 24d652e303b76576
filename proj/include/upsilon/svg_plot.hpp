#pragma once

// Static SVG line plots from tidy CSV: per series, the mean of the y column
// at each x with a shaded +/-1 std band.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace upsilon {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlotSpec {
  std::string x_column = "x";
  std::string y_column = "value";
  std::string series_column = "series";  // empty: a single series
  std::vector<std::pair<std::string, std::string>> filters;  // column == value
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log2_x = false;
};

// key = value lines: x, y, series, title, x_label, y_label, log2_x and
// filter.<column> = <value>. '#' starts a comment.
PlotSpec parse_plot_spec(std::string_view text);
PlotSpec load_plot_spec(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws PlotError naming the column when absent.
  std::size_t column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;  // sample std; 0 for a single observation
};

// Rows whose row_type column (if present) is not "cell" are skipped.
std::vector<PlotSeries> aggregate_series(const CsvTable& table, const PlotSpec& spec);

std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec);

// Reads the CSV, renders and writes the SVG. Nothing is written on error.
void plot_csv(const std::filesystem::path& csv_path, const PlotSpec& spec, const std::filesystem::path& out_path);

}  // namespace upsilon
