#include "povmap/rasters.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <string>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/format.hpp"

namespace povmap::rasters {

void RasterGrid::validate() const {
  if (ncols == 0 || nrows == 0) throw DataError("grid dimensions must be positive");
  if (!(cellsize > 0.0) || !std::isfinite(cellsize)) throw DataError("grid cellsize must be positive");
  if (values.size() != ncols * nrows) {
    throw DataError("grid holds " + std::to_string(values.size()) + " values, header declares " +
                    std::to_string(ncols * nrows));
  }
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

RasterGrid parse_grid(std::string_view text, std::string_view source) {
  const std::string where(source);
  std::istringstream in{std::string(text)};
  RasterGrid g;
  bool have_ncols = false, have_nrows = false, have_x = false, have_y = false, have_cell = false;

  // Header lines are "key value"; the first token that parses as a number starts the payload.
  std::string token;
  std::streampos data_start = 0;
  while (true) {
    data_start = in.tellg();
    if (!(in >> token)) break;
    const std::string key = lower(token);
    if (!key.empty() && (std::isdigit(static_cast<unsigned char>(key[0])) || key[0] == '-' || key[0] == '+' ||
                         key[0] == '.' || key == "nan" || key == "inf")) {
      break;
    }
    std::string value;
    if (!(in >> value)) throw DataError(where + ": header key '" + token + "' has no value");
    if (key == "ncols") {
      g.ncols = static_cast<std::size_t>(parse_int(value, "ncols"));
      have_ncols = true;
    } else if (key == "nrows") {
      g.nrows = static_cast<std::size_t>(parse_int(value, "nrows"));
      have_nrows = true;
    } else if (key == "xllcorner") {
      g.xll = parse_double(value, "xllcorner");
      have_x = true;
    } else if (key == "yllcorner") {
      g.yll = parse_double(value, "yllcorner");
      have_y = true;
    } else if (key == "cellsize") {
      g.cellsize = parse_double(value, "cellsize");
      have_cell = true;
    } else if (key == "nodata_value") {
      g.nodata = parse_double(value, "NODATA_value");
    } else {
      throw DataError(where + ": unknown header key '" + token + "'");
    }
  }
  if (!(have_ncols && have_nrows && have_x && have_y && have_cell)) {
    throw DataError(where + ": header requires ncols, nrows, xllcorner, yllcorner, cellsize");
  }
  if (g.ncols == 0 || g.nrows == 0) throw DataError(where + ": grid dimensions must be positive");

  in.clear();
  in.seekg(data_start);
  g.values.reserve(g.ncols * g.nrows);
  while (in >> token) g.values.push_back(parse_double(token, "grid value"));
  try {
    g.validate();
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
  return g;
}

RasterGrid read_grid(const std::filesystem::path& path) {
  return parse_grid(read_text_file(path), path.string());
}

std::string format_grid(const RasterGrid& g) {
  g.validate();
  std::string out;
  out.reserve(g.values.size() * 4 + 128);
  out += "ncols " + std::to_string(g.ncols) + "\n";
  out += "nrows " + std::to_string(g.nrows) + "\n";
  out += "xllcorner " + format_double(g.xll) + "\n";
  out += "yllcorner " + format_double(g.yll) + "\n";
  out += "cellsize " + format_double(g.cellsize) + "\n";
  out += "NODATA_value " + format_double(g.nodata) + "\n";
  for (std::size_t r = 0; r < g.nrows; ++r) {
    for (std::size_t c = 0; c < g.ncols; ++c) {
      if (c) out += ' ';
      out += format_double(g.at(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_grid(const RasterGrid& grid, const std::filesystem::path& path) {
  write_text_file(path, format_grid(grid));
}

PixelRange pixel_range(const RasterGrid& g, const geo::BBox& box) {
  // Pixel centers: lon = xll + (c + 0.5) * cs, lat = yll + (nrows - r - 0.5) * cs.
  // The range is widened by one pixel on each side; callers re-test centers exactly.
  auto clamp_index = [](double v, std::size_t n) -> std::size_t {
    if (!(v > 0.0)) return 0;
    if (v >= static_cast<double>(n)) return n;
    return static_cast<std::size_t>(v);
  };
  PixelRange r;
  const double c0 = std::floor((box.min_lon - g.xll) / g.cellsize - 0.5) - 1.0;
  const double c1 = std::ceil((box.max_lon - g.xll) / g.cellsize - 0.5) + 2.0;
  const double top = g.yll + static_cast<double>(g.nrows) * g.cellsize;
  const double r0 = std::floor((top - box.max_lat) / g.cellsize - 0.5) - 1.0;
  const double r1 = std::ceil((top - box.min_lat) / g.cellsize - 0.5) + 2.0;
  r.col_begin = clamp_index(c0, g.ncols);
  r.col_end = clamp_index(c1, g.ncols);
  r.row_begin = clamp_index(r0, g.nrows);
  r.row_end = clamp_index(r1, g.nrows);
  return r;
}

LuminosityStats summarize(std::vector<double>& values) {
  if (values.empty()) throw DataError("statistics over an empty window");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t third = (n + 2) / 3;

  LuminosityStats s;
  double total = 0.0;
  std::size_t zeros = 0;
  for (double v : values) {
    total += v;
    if (v == 0.0) ++zeros;
  }
  double low = 0.0;
  for (std::size_t i = 0; i < third; ++i) low += values[i];
  double high = 0.0;
  for (std::size_t i = n - third; i < n; ++i) high += values[i];

  s.max = values.back();
  s.mean = total / static_cast<double>(n);
  s.median = values[(n - 1) / 2];
  s.zero_ratio = static_cast<double>(zeros) / static_cast<double>(n);
  s.upper_third_mean = high / static_cast<double>(third);
  s.lower_third_mean = low / static_cast<double>(third);
  return s;
}

std::optional<LuminosityStats> try_window_stats(const RasterGrid& grid, const geo::GeoPoint& center,
                                                const geo::WindowSpec& w) {
  const geo::BBox box = geo::cell_window(center, w);
  std::vector<double> values;
  for_each_pixel_in(grid, box, [&](std::size_t, std::size_t, double v) { values.push_back(v); });
  if (values.empty()) return std::nullopt;
  return summarize(values);
}

LuminosityStats window_stats(const RasterGrid& grid, const geo::GeoPoint& center, const geo::WindowSpec& w) {
  auto s = try_window_stats(grid, center, w);
  if (!s) throw DataError("luminosity window holds no data pixels");
  return *s;
}

WindowSum window_sum(const RasterGrid& grid, const geo::GeoPoint& center, const geo::WindowSpec& w) {
  const geo::BBox box = geo::cell_window(center, w);
  if (!box.intersects(grid.bounds())) throw DataError("window does not overlap the grid");
  WindowSum out;
  for_each_pixel_in(grid, box, [&](std::size_t, std::size_t, double v) {
    out.sum += v;
    ++out.pixels;
  });
  out.empty = out.pixels == 0;
  return out;
}

}  // namespace povmap::rasters
