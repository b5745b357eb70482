#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace dac {

/// A parsed delimiter-separated file. `lines[i]` is the 1-based source line
/// on which `rows[i]` starts.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
  char delimiter = ',';

  /// Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
};

/// Picks tab when the header line holds more tabs than commas.
char detect_delimiter(std::string_view header_line);

/// Reads RFC 4180 style text: quoted fields may hold delimiters, doubled
/// quotes and newlines. Blank lines are skipped. Every row must have the
/// header's width.
CsvTable parse_csv(std::string_view text, std::optional<char> delimiter = std::nullopt);
CsvTable read_csv(std::istream& in, std::optional<char> delimiter = std::nullopt);

/// Whole-file read; transparently inflates gzip input.
std::string read_file(const std::string& path);
CsvTable read_csv_file(const std::string& path, std::optional<char> delimiter = std::nullopt);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out, char delimiter = ',') : out_(out), delimiter_(delimiter) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  char delimiter_;
};

}  // namespace dac
