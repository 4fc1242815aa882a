#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "terra/common.hpp"

namespace terra::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const;
};

// Comma-delimited, dot-decimal, one header row. Throws on ragged rows or
// unparseable cells.
Table read_table(const std::filesystem::path& path);

void write_table(const std::filesystem::path& path,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

// Mixed text/number output used by report tables.
void write_text_table(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows);

}  // namespace terra::csv
