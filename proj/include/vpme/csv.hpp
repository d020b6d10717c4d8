#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "error.hpp"

namespace vpme {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw SchemaError("not a number: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Header plus numeric rows.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return c;
        throw SchemaError("missing column '" + std::string(name) + "'");
    }
    std::vector<double> values(std::string_view name) const {
        const std::size_t c = column(name);
        std::vector<double> v;
        v.reserve(rows.size());
        for (const auto& r : rows) v.push_back(r[c]);
        return v;
    }
};

inline void write_table(const std::string& path, const Table& t, char sep = ',', std::string_view preamble = {}) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << preamble;
    for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? std::string(1, sep) : "") << t.columns[c];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t c = 0; c < r.size(); ++c) os << (c ? std::string(1, sep) : "") << format_double(r[c]);
        os << '\n';
    }
}

/// Reads a numeric table; lines starting with '#' are skipped. If
/// `expected_columns` is non-empty the header must match it exactly.
inline Table read_table(const std::string& path, char sep = ',', const std::vector<std::string>& expected_columns = {}) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SchemaError("cannot open " + path);
    Table t;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split(line, sep);
        if (!have_header) {
            t.columns = std::move(fields);
            have_header = true;
            if (!expected_columns.empty() && t.columns != expected_columns)
                throw SchemaError(path + ": header does not match the documented column schema");
            continue;
        }
        if (fields.size() != t.columns.size())
            throw SchemaError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                              " fields, found " + std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_double(f));
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw SchemaError(path + ": empty file");
    return t;
}

}  // namespace vpme
