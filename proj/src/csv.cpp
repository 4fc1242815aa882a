#include "terra/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace terra::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace
        std::size_t b = cell.find_first_not_of(" \t\r");
        std::size_t e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

int Table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.is_open(), "cannot open file: " + path.string());

    Table t;
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty file: " + path.string());
    if (!line.empty() && line.front() == '\xEF') line = line.substr(3);  // UTF-8 BOM
    t.header = split_line(line);

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        require(cells.size() == t.header.size(),
                path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(t.header.size()) + " columns, got " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::string& c = cells[i];
            double v = 0.0;
            auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            require(ec == std::errc() && p == c.data() + c.size(),
                    path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
            row[i] = v;
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_table(const std::filesystem::path& path,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    out.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "\n");
    }
}

void write_text_table(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    require(out.is_open(), "cannot write file: " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "\n");
    }
}

}  // namespace terra::csv
