#pragma once

#include "dunkl/errors.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dunkl::cli {

/// A real, a string, or a coordinate vector (written as ';'-joined reals).
using Cell = std::variant<double, std::string, std::vector<double>>;

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    /// key = value pairs written as '#' lines after the header.
    std::vector<std::pair<std::string, std::string>> provenance;
    /// Set when verify-theorem finds disagreeing flags; the table is still emitted.
    std::optional<std::string> consistency_failure;

    explicit ResultTable(std::vector<std::string> cols = {}) : columns(std::move(cols)) {}

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns.size())
            throw ValidationError("ResultTable: row has " + std::to_string(row.size()) + " cells, expected " +
                                  std::to_string(columns.size()));
        rows.push_back(std::move(row));
    }
};

/// 17 significant digits: enough to round-trip every double.
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::string format_cell(const Cell& cell) {
    if (const auto* d = std::get_if<double>(&cell)) return format_real(*d);
    if (const auto* s = std::get_if<std::string>(&cell)) return quote_field(*s);
    std::string out;
    for (double v : std::get<std::vector<double>>(cell)) out += (out.empty() ? "" : ";") + format_real(v);
    return out;
}

/// Header row, then '#' provenance lines, then data rows; LF endings.
inline void write_csv(const ResultTable& table, std::ostream& os) {
    if (table.columns.empty()) throw ValidationError("ResultTable: header must not be empty");
    if (table.provenance.empty()) throw ValidationError("ResultTable: provenance is required");
    for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << quote_field(table.columns[i]);
    os << '\n';
    for (const auto& [key, value] : table.provenance) os << "# " << key << '=' << value << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        os << '\n';
    }
}

inline void emit_csv(const ResultTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing: " + std::strerror(errno));
    write_csv(table, out);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path + "' failed: " + std::strerror(errno));
}

/// Parsed CSV: header, provenance lines (without '# '), and raw data fields.
struct CsvContent {
    std::vector<std::string> header;
    std::vector<std::string> provenance;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

inline CsvContent read_csv(std::istream& in) {
    CsvContent csv;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("csv: missing header");
    csv.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) csv.provenance.push_back(line.substr(2));
        else csv.rows.push_back(split_csv_line(line));
    }
    return csv;
}

} // namespace dunkl::cli
