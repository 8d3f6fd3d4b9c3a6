#pragma once

#include <string>
#include <vector>

namespace hte::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Comma-separated, header row required, "." decimal point, empty cell means
// missing. Quoted fields may contain commas, doubled quotes, and newlines.
Table read_file(const std::string& path);
Table parse(const std::string& text);

std::string escape(const std::string& field);
std::string join_row(const std::vector<std::string>& fields);

// Strict full-cell numeric parse; returns false for anything else.
bool parse_number(const std::string& cell, double& out);

void write_file(const std::string& path, const std::string& content);

}  // namespace hte::csv
