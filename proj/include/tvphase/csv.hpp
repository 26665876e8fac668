#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tvphase::csv {

using Table = std::vector<std::vector<double>>;

/* Reads a comma-separated numeric table. Lines starting with '#' and a leading
 * non-numeric header row are skipped. Throws FormatError on ragged rows or
 * unparsable fields. */
Table read_numeric(std::istream& in);
Table read_numeric_file(const std::string& path);

/* Header line comes first; values are written with 17 significant digits so
 * that doubles survive a round trip. */
void write_numeric(std::ostream& out, const std::vector<std::string>& header, const Table& rows);
void write_numeric_file(const std::string& path, const std::vector<std::string>& header,
    const Table& rows);

std::string format_double(double v);

} // namespace tvphase::csv
