#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace csn::csv {

using Row = std::vector<std::string>;

/// Parses RFC-4180 text. Accepts CRLF or bare LF line endings; a trailing
/// line break does not produce an empty record. Throws IoError on an
/// unterminated quoted field or a quote inside an unquoted field.
std::vector<Row> parse(std::string_view text);

/// Header row plus records, with every record checked to match the header width.
struct Table {
    Row header;
    std::vector<Row> rows;
};

Table parse_table(std::string_view text);
Table read_table(const std::string& path);

/// Quotes only when the field holds a comma, quote, CR or LF.
std::string escape_field(std::string_view field);
void append_row(std::string& out, const Row& row);
std::string write(const Table& table);

}  // namespace csn::csv
