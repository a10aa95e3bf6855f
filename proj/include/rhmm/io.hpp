#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "rhmm/model.hpp"

namespace rhmm::io {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  ///< 1-based source line of each row

  /// Column index by name, or -1.
  int column(const std::string& name) const;
};

/// Comma-separated, header row first, LF or CRLF line ends, no quoting.
/// Blank lines are skipped. Throws ParseError on ragged rows.
CsvTable read_csv(std::istream& is);

/// Returns from a table with a `return` column, an `observed` column (the
/// simulator's output) or a `price` column converted to log-returns.
/// An optional `date` column becomes the timestamps.
ReturnSeries returns_from_table(const CsvTable& table);
ReturnSeries read_returns(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories. Throws Error when
/// the file cannot be written.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace rhmm::io
