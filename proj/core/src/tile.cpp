#include "povmap/tile.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"

namespace povmap::imgcls {

namespace fs = std::filesystem;

void Tile::validate() const {
  if (size == 0) throw DataError("tile " + place_id + ": zero size");
  if (pixels.size() != 3 * size * size) throw DataError("tile " + place_id + ": payload does not match 3 x size x size");
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("tile " + place_id + ": value outside [0, 1]");
  }
}

Tile blank_tile(std::string place_id, std::size_t size) {
  return {std::move(place_id), size, std::vector<float>(3 * size * size, 0.0f)};
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

Tile read_png(const fs::path& path, std::string place_id) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("tile " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("tile " + path.string() + ": " + image.message);
  }
  if (image.width != image.height) throw DataError("tile " + path.string() + ": not square");
  Tile t;
  t.place_id = std::move(place_id);
  t.size = image.width;
  t.pixels.resize(3 * t.size * t.size);
  for (std::size_t r = 0; r < t.size; ++r) {
    for (std::size_t c = 0; c < t.size; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        t.at(ch, r, c) = static_cast<float>(buffer[(r * t.size + c) * 3 + ch]) / 255.0f;
      }
    }
  }
  return t;
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

Tile read_raw(const fs::path& path, std::string place_id) {
  const std::string data = read_text_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  if (data.size() < 16 || data.compare(0, 4, "PVT1") != 0) throw DataError("tile " + path.string() + ": bad tensor header");
  const std::uint32_t h = read_u32(p + 4), w = read_u32(p + 8), ch = read_u32(p + 12);
  if (h != w || ch != 3 || h == 0) throw DataError("tile " + path.string() + ": tensor must be square with 3 channels");
  const std::size_t count = static_cast<std::size_t>(h) * w * 3;
  if (data.size() != 16 + 4 * count) throw DataError("tile " + path.string() + ": tensor payload length mismatch");
  Tile t;
  t.place_id = std::move(place_id);
  t.size = h;
  t.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = read_u32(p + 16 + 4 * i);
    std::memcpy(&t.pixels[i], &bits, 4);
  }
  t.validate();
  return t;
}

}  // namespace

Tile read_tile(const fs::path& path, std::string place_id) {
  if (!fs::exists(path)) throw DataError("tile file not found: " + path.string());
  return path.extension() == ".tensor" ? read_raw(path, std::move(place_id)) : read_png(path, std::move(place_id));
}

void write_png(const Tile& tile, const fs::path& path) {
  tile.validate();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<png_byte> buffer(3 * tile.size * tile.size);
  for (std::size_t r = 0; r < tile.size; ++r) {
    for (std::size_t c = 0; c < tile.size; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        buffer[(r * tile.size + c) * 3 + ch] = static_cast<png_byte>(std::lround(tile.at(ch, r, c) * 255.0f));
      }
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(tile.size);
  image.height = static_cast<png_uint_32>(tile.size);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw DataError("cannot write " + path.string() + ": " + image.message);
  }
}

void write_tensor(const Tile& tile, const fs::path& path) {
  tile.validate();
  std::string out = "PVT1";
  put_u32(out, static_cast<std::uint32_t>(tile.size));
  put_u32(out, static_cast<std::uint32_t>(tile.size));
  put_u32(out, 3);
  for (float v : tile.pixels) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  write_text_file(path, out);
}

std::vector<TileEntry> read_tile_manifest(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t id = t.column("place_id"), file = t.column("path");
  const fs::path base = path.parent_path();
  std::vector<TileEntry> out;
  for (const auto& row : t.rows) {
    fs::path p(row[file]);
    out.push_back({row[id], p.is_absolute() ? p : base / p});
  }
  return out;
}

std::string format_tile_manifest(const std::vector<TileEntry>& entries, const fs::path& base_dir) {
  std::ostringstream out;
  write_csv_row(out, {"place_id", "path"});
  for (const auto& e : entries) write_csv_row(out, {e.place_id, e.path.lexically_relative(base_dir).generic_string()});
  return out.str();
}

}  // namespace povmap::imgcls
