#pragma once

#include <string>
#include <vector>

namespace sos {

using CsvRow = std::vector<std::string>;

// Parses a CSV file into rows. Fields may be double-quoted; a quoted field
// may contain commas and doubled quotes. No embedded newlines.
std::vector<CsvRow> read_csv(const std::string& path);

// Splits one CSV line into fields.
CsvRow split_csv_line(const std::string& line);

// Joins fields into one line, quoting only where needed.
std::string join_csv_row(const CsvRow& row);

void write_csv(const std::string& path, const std::vector<CsvRow>& rows);

// Shortest decimal form that round-trips the value (via std::to_chars).
std::string format_double(double v);
std::string format_float(float v);

// Whole-file helpers.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace sos
