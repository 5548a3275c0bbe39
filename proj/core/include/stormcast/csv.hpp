#pragma once

#include <string>
#include <vector>

namespace stormcast {

/// Minimal CSV support for the flat numeric tables this project exchanges.
/// No quoting or embedded separators; trailing \r is stripped.
struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // 1-based line number of each row in the source file, for error messages.
    std::vector<int> line_numbers;

    int column(const std::string& name) const; // -1 when absent
};

CsvTable read_csv(const std::string& path);

// Validates the header exactly matches `expected` (order included).
CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected);

std::vector<std::string> split_line(const std::string& line);

// Shortest round-trip decimal form; "0" for exact zero. Used for every
// number written to an artifact so reruns are byte-identical.
std::string format_double(double v);

std::string join_csv(const std::vector<std::string>& fields);

} // namespace stormcast
