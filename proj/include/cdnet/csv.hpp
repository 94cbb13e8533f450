#pragma once

#include "cdnet/model_core.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cdnet::csv {

/// Shortest decimal text that parses back to the same double.
std::string format(double v);
double parse_double(std::string_view text);

std::vector<std::string> split_line(std::string_view line);
std::string join(const std::vector<std::string>& cells);

/// Header row plus data rows of a comma separated file.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
Table read_table(const std::filesystem::path& path);

Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace cdnet::csv
