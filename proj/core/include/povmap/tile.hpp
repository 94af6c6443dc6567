#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace povmap::imgcls {

/// Square RGB image, channel-major (3 x size x size), values in [0, 1].
struct Tile {
  std::string place_id;
  std::size_t size = 0;
  std::vector<float> pixels;

  float at(std::size_t channel, std::size_t row, std::size_t col) const {
    return pixels[(channel * size + row) * size + col];
  }
  float& at(std::size_t channel, std::size_t row, std::size_t col) { return pixels[(channel * size + row) * size + col]; }
  /// Throws DataError for wrong payload length or values outside [0, 1].
  void validate() const;
};

Tile blank_tile(std::string place_id, std::size_t size);

/// Reads an 8-bit PNG (gray, RGB, with or without alpha) or a raw tensor file
/// (".tensor": magic "PVT1", u32 height, u32 width, u32 channels = 3, then
/// little-endian float32 values in channel-major order).
Tile read_tile(const std::filesystem::path& path, std::string place_id = {});
void write_png(const Tile& tile, const std::filesystem::path& path);
void write_tensor(const Tile& tile, const std::filesystem::path& path);

struct TileEntry {
  std::string place_id;
  std::filesystem::path path;  ///< resolved against the manifest directory
};

/// Tile manifest CSV: place_id,path (paths relative to the CSV's directory).
std::vector<TileEntry> read_tile_manifest(const std::filesystem::path& path);
std::string format_tile_manifest(const std::vector<TileEntry>& entries, const std::filesystem::path& base_dir);

}  // namespace povmap::imgcls
