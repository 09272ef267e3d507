#pragma once

// Deterministic CSV helpers. Doubles are printed as shortest round-trip
// decimals so exported reports are byte-identical across runs and parse back
// to the exact in-memory values.

#include <string>
#include <vector>

namespace latref {

std::string format_double(double x);
double parse_double(const std::string& s);

std::vector<std::string> split_csv_line(const std::string& line);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Returns rows (header excluded); verifies the header matches.
std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::vector<std::string>& expected_header);

}  // namespace latref
