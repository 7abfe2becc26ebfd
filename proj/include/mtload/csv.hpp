#pragma once

#include <string>
#include <vector>

namespace mtload {

// Minimal comma-separated table. No quoting: none of the engine's formats
// needs embedded commas.
struct CsvTable {
	std::vector<std::string> header;
	std::vector<std::vector<std::string>> rows;

	int column(const std::string& name) const;  // -1 when absent
};

CsvTable readCsv(const std::string& path);
void writeCsv(const std::string& path, const CsvTable& table);

}  // namespace mtload
