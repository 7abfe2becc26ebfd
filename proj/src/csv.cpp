#include "mtload/csv.hpp"

#include <fstream>
#include <stdexcept>

namespace mtload {

int CsvTable::column(const std::string& name) const {
	for (std::size_t i = 0; i < header.size(); ++i) {
		if (header[i] == name) return static_cast<int>(i);
	}
	return -1;
}

namespace {

std::vector<std::string> splitLine(const std::string& line) {
	std::vector<std::string> out;
	std::string cur;
	for (char ch : line) {
		if (ch == ',') {
			out.push_back(cur);
			cur.clear();
		} else if (ch != '\r') {
			cur += ch;
		}
	}
	out.push_back(cur);
	return out;
}

}  // namespace

CsvTable readCsv(const std::string& path) {
	std::ifstream in(path);
	if (!in) {
		throw std::runtime_error("cannot open file: " + path);
	}
	CsvTable t;
	std::string line;
	if (!std::getline(in, line)) {
		throw std::runtime_error("empty file: " + path);
	}
	t.header = splitLine(line);
	while (std::getline(in, line)) {
		if (line.empty() || line == "\r") continue;
		t.rows.push_back(splitLine(line));
	}
	return t;
}

void writeCsv(const std::string& path, const CsvTable& table) {
	std::ofstream out(path);
	if (!out) {
		throw std::runtime_error("cannot write file: " + path);
	}
	for (std::size_t i = 0; i < table.header.size(); ++i) {
		if (i) out << ',';
		out << table.header[i];
	}
	out << '\n';
	for (const auto& row : table.rows) {
		for (std::size_t i = 0; i < row.size(); ++i) {
			if (i) out << ',';
			out << row[i];
		}
		out << '\n';
	}
}

}  // namespace mtload
