#include "stormcast/csv.hpp"

#include <charconv>
#include <fstream>

#include "stormcast/errors.hpp"

namespace stormcast {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    CsvTable table;
    table.path = path;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    table.header = split_line(line);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line);
        if (fields.size() != table.header.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(lineno);
    }
    return table;
}

CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected) {
    CsvTable table = read_csv(path);
    if (table.header != expected) {
        std::string want, got;
        for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
        for (const auto& c : table.header) got += (got.empty() ? "" : ",") + c;
        throw DataError(path + ": header mismatch; expected '" + want + "', got '" + got + "'");
    }
    return table;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string join_csv(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

} // namespace stormcast
