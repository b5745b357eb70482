#include "dac/csv.hpp"

#include "dac/core.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>

namespace dac {

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

char detect_delimiter(std::string_view header_line) {
  std::size_t tabs = 0, commas = 0;
  bool quoted = false;
  for (char c : header_line) {
    if (c == '"') quoted = !quoted;
    if (quoted) continue;
    if (c == '\t') ++tabs;
    if (c == ',') ++commas;
  }
  return tabs > commas ? '\t' : ',';
}

namespace {

struct RowReader {
  std::string_view text;
  char delim;
  std::size_t pos = 0;
  std::size_t line = 1;

  bool done() const { return pos >= text.size(); }

  // Reads one record; returns false at end of input. Sets start_line.
  bool next(std::vector<std::string>& fields, std::size_t& start_line) {
    fields.clear();
    while (!done() && (text[pos] == '\n' || text[pos] == '\r')) {
      if (text[pos] == '\n') ++line;
      ++pos;
    }
    if (done()) return false;
    start_line = line;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    while (!done()) {
      const char c = text[pos];
      if (quoted) {
        if (c == '"') {
          if (pos + 1 < text.size() && text[pos + 1] == '"') {
            field += '"';
            pos += 2;
            continue;
          }
          quoted = false;
          ++pos;
          continue;
        }
        if (c == '\n') ++line;
        field += c;
        ++pos;
        continue;
      }
      if (c == '"' && field.empty() && !was_quoted) {
        quoted = true;
        was_quoted = true;
        ++pos;
        continue;
      }
      if (c == delim) {
        fields.push_back(was_quoted ? field : trim(field));
        field.clear();
        was_quoted = false;
        ++pos;
        continue;
      }
      if (c == '\n' || c == '\r') {
        if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
        ++pos;
        ++line;
        break;
      }
      field += c;
      ++pos;
    }
    if (quoted) throw RowError(start_line, "unterminated quoted field");
    fields.push_back(was_quoted ? field : trim(field));
    return true;
  }
};

}  // namespace

CsvTable parse_csv(std::string_view text, std::optional<char> delimiter) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  CsvTable table;
  const auto first_newline = text.find('\n');
  table.delimiter = delimiter.value_or(detect_delimiter(text.substr(0, first_newline)));
  RowReader reader{text, table.delimiter};
  std::size_t line = 0;
  if (!reader.next(table.header, line)) throw SchemaError("empty file: no header row");
  std::vector<std::string> fields;
  while (reader.next(fields, line)) {
    if (fields.size() != table.header.size()) {
      throw RowError(line, "expected " + std::to_string(table.header.size()) + " fields, found " +
                               std::to_string(fields.size()));
    }
    table.rows.push_back(fields);
    table.lines.push_back(line);
  }
  return table;
}

CsvTable read_csv(std::istream& in, std::optional<char> delimiter) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), delimiter);
}

std::string read_file(const std::string& path) {
  gzFile gz = gzopen(path.c_str(), "rb");
  if (gz == nullptr) throw DataError("cannot open input file: " + path);
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(gz, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(gz);
  if (failed) throw DataError("cannot read input file: " + path);
  return out;
}

CsvTable read_csv_file(const std::string& path, std::optional<char> delimiter) {
  try {
    return parse_csv(read_file(path), delimiter);
  } catch (const RowError& e) {
    throw DataError(path + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << delimiter_;
    const std::string& f = fields[i];
    const bool needs_quotes = f.find_first_of(std::string("\"\n\r") + delimiter_) != std::string::npos;
    if (!needs_quotes) {
      out_ << f;
      continue;
    }
    out_ << '"';
    for (char c : f) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  }
  out_ << '\n';
}

}  // namespace dac
