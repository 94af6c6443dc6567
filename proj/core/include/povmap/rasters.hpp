#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "povmap/geo.hpp"

namespace povmap::rasters {

/// North-up grid in geographic degrees. Row 0 is the northern edge,
/// values are stored row-major as in an ESRI ASCII grid.
struct RasterGrid {
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double xll = 0.0;  ///< western edge (longitude)
  double yll = 0.0;  ///< southern edge (latitude)
  double cellsize = 0.0;
  double nodata = -9999.0;
  std::vector<double> values;

  /// Throws DataError if dimensions, cellsize or value count are inconsistent.
  void validate() const;

  double at(std::size_t row, std::size_t col) const { return values[row * ncols + col]; }
  double& at(std::size_t row, std::size_t col) { return values[row * ncols + col]; }
  bool is_nodata(double v) const { return v == nodata; }

  geo::GeoPoint pixel_center(std::size_t row, std::size_t col) const {
    return {yll + (static_cast<double>(nrows - row) - 0.5) * cellsize,
            xll + (static_cast<double>(col) + 0.5) * cellsize};
  }
  geo::BBox bounds() const {
    return {yll, yll + static_cast<double>(nrows) * cellsize, xll, xll + static_cast<double>(ncols) * cellsize};
  }

  friend bool operator==(const RasterGrid&, const RasterGrid&) = default;
};

RasterGrid parse_grid(std::string_view text, std::string_view source = "<memory>");
RasterGrid read_grid(const std::filesystem::path& path);
std::string format_grid(const RasterGrid& grid);
void write_grid(const RasterGrid& grid, const std::filesystem::path& path);

/// Inclusive row/column range whose pixel centers may fall inside a box.
struct PixelRange {
  std::size_t row_begin = 0, row_end = 0;  ///< [begin, end)
  std::size_t col_begin = 0, col_end = 0;
  bool empty() const { return row_begin >= row_end || col_begin >= col_end; }
};
PixelRange pixel_range(const RasterGrid& grid, const geo::BBox& box);

/// Calls fn(row, col, value) for every non-nodata pixel whose center lies in `box`,
/// in row-major order.
template <typename Fn>
void for_each_pixel_in(const RasterGrid& grid, const geo::BBox& box, Fn&& fn) {
  const PixelRange r = pixel_range(grid, box);
  for (std::size_t row = r.row_begin; row < r.row_end; ++row) {
    for (std::size_t col = r.col_begin; col < r.col_end; ++col) {
      const double v = grid.at(row, col);
      if (grid.is_nodata(v)) continue;
      if (!box.contains(grid.pixel_center(row, col))) continue;
      fn(row, col, v);
    }
  }
}

/// Six night-light summaries of one window.
struct LuminosityStats {
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double zero_ratio = 0.0;
  double upper_third_mean = 0.0;
  double lower_third_mean = 0.0;

  friend bool operator==(const LuminosityStats&, const LuminosityStats&) = default;
};

/// Statistics over an explicit sample. Mean is the ascending-order sum over n;
/// median is the lower middle for even n; thirds are the top/bottom ceil(n/3)
/// values by rank. `values` is sorted in place. Throws DataError when empty.
LuminosityStats summarize(std::vector<double>& values);

/// Window statistics over non-nodata pixels whose centers fall inside the
/// cell window. Throws DataError when the window holds no such pixel.
LuminosityStats window_stats(const RasterGrid& grid, const geo::GeoPoint& center, const geo::WindowSpec& w);
/// As window_stats, but returns nullopt for an empty window.
std::optional<LuminosityStats> try_window_stats(const RasterGrid& grid, const geo::GeoPoint& center,
                                                const geo::WindowSpec& w);

struct WindowSum {
  double sum = 0.0;
  std::size_t pixels = 0;
  bool empty = true;  ///< no data pixel inside the window
};

/// Sum of non-nodata pixels in the window. Throws DataError when the window
/// does not overlap the grid at all.
WindowSum window_sum(const RasterGrid& grid, const geo::GeoPoint& center, const geo::WindowSpec& w);

}  // namespace povmap::rasters
