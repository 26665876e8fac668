#include "tvphase/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tvphase/error.hpp"

namespace tvphase::csv {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) { s.remove_prefix(1); }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) { s.remove_suffix(1); }
    return s;
}

bool parse_row(std::string_view line, std::vector<double>& out)
{
    out.clear();
    for (;;) {
        auto comma = line.find(',');
        std::string_view field = trim(line.substr(0, comma));
        // from_chars does not accept a leading '+'
        if (!field.empty() && field.front() == '+') { field.remove_prefix(1); }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) { return false; }
        out.push_back(v);
        if (comma == std::string_view::npos) { break; }
        line.remove_prefix(comma + 1);
    }
    return true;
}

} // namespace

Table read_numeric(std::istream& in)
{
    Table rows;
    std::string line;
    std::vector<double> row;
    bool seen_content = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') { continue; }
        if (!parse_row(view, row)) {
            if (!seen_content) { seen_content = true; continue; } // header
            throw FormatError("csv line " + std::to_string(line_no) + ": non-numeric field");
        }
        seen_content = true;
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw FormatError("csv line " + std::to_string(line_no) + ": expected "
                + std::to_string(rows.front().size()) + " fields, got " + std::to_string(row.size()));
        }
        rows.push_back(row);
    }
    return rows;
}

Table read_numeric_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) { throw FormatError("cannot open " + path); }
    return read_numeric(in);
}

std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

void write_numeric(std::ostream& out, const std::vector<std::string>& header, const Table& rows)
{
    for (std::size_t k = 0; k < header.size(); ++k) { out << (k ? "," : "") << header[k]; }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) { out << (k ? "," : "") << format_double(row[k]); }
        out << '\n';
    }
}

void write_numeric_file(const std::string& path, const std::vector<std::string>& header,
    const Table& rows)
{
    std::ofstream out(path);
    if (!out) { throw FormatError("cannot write " + path); }
    write_numeric(out, header, rows);
}

} // namespace tvphase::csv
