#include "csn/csv.hpp"

#include <fstream>
#include <sstream>

#include "csn/error.hpp"

namespace csn::csv {

std::vector<Row> parse(std::string_view text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool row_started = false;
    std::size_t i = 0;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        row_started = false;
    };

    while (i < text.size()) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                in_quotes = false;
                ++i;
                continue;
            }
            field.push_back(c);
            ++i;
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted)
                    throw IoError("csv: stray quote at offset " + std::to_string(i));
                in_quotes = true;
                field_was_quoted = true;
                row_started = true;
                ++i;
                break;
            case ',':
                end_field();
                row_started = true;
                ++i;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                [[fallthrough]];
            case '\n':
                end_row();
                ++i;
                break;
            default:
                if (field_was_quoted)
                    throw IoError("csv: text after closing quote at offset " + std::to_string(i));
                field.push_back(c);
                row_started = true;
                ++i;
        }
    }
    if (in_quotes) throw IoError("csv: unterminated quoted field");
    if (row_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

Table parse_table(std::string_view text) {
    auto rows = parse(text);
    if (rows.empty()) throw IoError("csv: missing header row");
    Table table;
    table.header = std::move(rows.front());
    table.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.header.size())
            throw IoError("csv: record " + std::to_string(r + 1) + " has " +
                          std::to_string(table.rows[r].size()) + " fields, header has " +
                          std::to_string(table.header.size()));
    }
    return table;
}

Table read_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_table(ss.str());
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

std::string escape_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void append_row(std::string& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += escape_field(row[i]);
    }
    out += "\r\n";
}

std::string write(const Table& table) {
    std::string out;
    append_row(out, table.header);
    for (const auto& row : table.rows) append_row(out, row);
    return out;
}

}  // namespace csn::csv
