#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace povmap {

/// A parsed CSV file with a mandatory header row (RFC 4180 quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index of `name`, or nullopt.
  std::optional<std::size_t> find(std::string_view name) const;
  /// Column index of `name`; throws DataError when absent.
  std::size_t column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text, std::string_view source = "<memory>");
CsvTable read_csv(const std::filesystem::path& path);

/// Writes one record, quoting fields that need it. Always terminates with '\n'.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

std::string read_text_file(const std::filesystem::path& path);
/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace povmap
