#include "mtload/ingest.hpp"

#include "mtload/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mtload {

Eigen::Index HourlyPanel::seriesIndex(const std::string& name) const {
	for (std::size_t i = 0; i < seriesNames.size(); ++i) {
		if (seriesNames[i] == name) return static_cast<Eigen::Index>(i);
	}
	throw std::out_of_range("HourlyPanel: no series named '" + name + "'");
}

namespace {

constexpr int kMaxGapHours = 6;

bool parseCell(const std::string& cell, double* out) {
	if (cell.empty()) return false;
	std::string lower = cell;
	std::transform(lower.begin(), lower.end(), lower.begin(),
	               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
	if (lower == "nan" || lower == "na" || lower == "null") return false;
	std::size_t pos = 0;
	const double v = std::stod(cell, &pos);
	if (pos != cell.size() || !std::isfinite(v)) {
		throw std::invalid_argument("readPanelCsv: malformed numeric cell '" + cell + "'");
	}
	*out = v;
	return true;
}

void fillGaps(Matrix& values, const TimeGrid& grid, const std::string& seriesName,
              Eigen::Index col) {
	const Eigen::Index t = values.rows();
	Eigen::Index i = 0;
	while (i < t) {
		if (std::isfinite(values(i, col))) {
			++i;
			continue;
		}
		Eigen::Index end = i;
		while (end < t && !std::isfinite(values(end, col))) ++end;
		const Eigen::Index span = end - i;
		std::ostringstream where;
		where << seriesName << " [" << formatHourStamp(grid.at(i)) << ", "
		      << formatHourStamp(grid.at(end - 1)) << "]";
		if (i == 0 || end == t) {
			throw std::runtime_error("readPanelCsv: missing values at the panel edge: " + where.str());
		}
		if (span > kMaxGapHours) {
			throw std::runtime_error("readPanelCsv: gap of " + std::to_string(span) +
			                         " hours exceeds " + std::to_string(kMaxGapHours) + ": " +
			                         where.str());
		}
		const double lo = values(i - 1, col);
		const double hi = values(end, col);
		for (Eigen::Index j = i; j < end; ++j) {
			const double w = static_cast<double>(j - i + 1) / static_cast<double>(span + 1);
			values(j, col) = lo + w * (hi - lo);
		}
		i = end;
	}
}

}  // namespace

HourlyPanel readPanelCsv(const std::string& path,
                         const std::map<std::string, std::vector<std::string>>& columnGroups) {
	CsvTable table = readCsv(path);
	if (table.header.empty() || table.header.front() != "timestamp") {
		throw std::runtime_error("readPanelCsv: first column must be 'timestamp' in " + path);
	}
	if (table.header.size() < 2) {
		throw std::runtime_error("readPanelCsv: no series columns in " + path);
	}
	if (table.rows.empty()) {
		throw std::runtime_error("readPanelCsv: no data rows in " + path);
	}

	// Output series -> input column indices (identity mapping by default).
	std::vector<std::string> names;
	std::vector<std::vector<int>> sources;
	if (columnGroups.empty()) {
		for (std::size_t c = 1; c < table.header.size(); ++c) {
			names.push_back(table.header[c]);
			sources.push_back({static_cast<int>(c)});
		}
	} else {
		for (const auto& [name, cols] : columnGroups) {
			std::vector<int> idx;
			for (const std::string& colName : cols) {
				const int c = table.column(colName);
				if (c <= 0) {
					throw std::runtime_error("readPanelCsv: no column '" + colName + "' in " + path);
				}
				idx.push_back(c);
			}
			if (idx.empty()) {
				throw std::runtime_error("readPanelCsv: empty column group '" + name + "'");
			}
			names.push_back(name);
			sources.push_back(std::move(idx));
		}
	}

	HourStamp lo = std::numeric_limits<HourStamp>::max();
	HourStamp hi = std::numeric_limits<HourStamp>::min();
	std::vector<HourStamp> stamps;
	stamps.reserve(table.rows.size());
	for (const auto& row : table.rows) {
		if (row.size() != table.header.size()) {
			throw std::runtime_error("readPanelCsv: ragged row in " + path);
		}
		const HourStamp ts = parseHourStamp(row.front());
		stamps.push_back(ts);
		lo = std::min(lo, ts);
		hi = std::max(hi, ts);
	}

	HourlyPanel panel;
	panel.grid = buildHourlyGrid(lo, hi - lo + 1);
	panel.seriesNames = names;
	const Eigen::Index t = panel.grid.length;
	const Eigen::Index n = static_cast<Eigen::Index>(names.size());
	panel.values = Matrix::Constant(t, n, std::numeric_limits<double>::quiet_NaN());
	std::vector<int> fills(static_cast<std::size_t>(t), 0);

	for (std::size_t r = 0; r < table.rows.size(); ++r) {
		const Eigen::Index i = panel.grid.index(stamps[r]);
		if (fills[static_cast<std::size_t>(i)] >= 2) {
			throw std::runtime_error("readPanelCsv: timestamp " + formatHourStamp(stamps[r]) +
			                         " appears more than twice");
		}
		for (Eigen::Index s = 0; s < n; ++s) {
			double acc = 0.0;
			int got = 0;
			for (int c : sources[static_cast<std::size_t>(s)]) {
				double v = 0.0;
				if (parseCell(table.rows[r][static_cast<std::size_t>(c)], &v)) {
					acc += v;
					++got;
				}
			}
			if (got == 0) continue;
			const double value = acc / got;
			double& cell = panel.values(i, s);
			// DST fold: the second occurrence averages with the first.
			cell = std::isfinite(cell) ? 0.5 * (cell + value) : value;
		}
		fills[static_cast<std::size_t>(i)] += 1;
	}

	for (Eigen::Index s = 0; s < n; ++s) {
		fillGaps(panel.values, panel.grid, panel.seriesNames[static_cast<std::size_t>(s)], s);
	}
	return panel;
}

void writePanelCsv(const std::string& path, const HourlyPanel& panel) {
	CsvTable table;
	table.header.push_back("timestamp");
	for (const auto& name : panel.seriesNames) table.header.push_back(name);
	table.rows.reserve(static_cast<std::size_t>(panel.grid.length));
	for (Eigen::Index i = 0; i < panel.grid.length; ++i) {
		std::vector<std::string> row;
		row.push_back(formatHourStamp(panel.grid.at(i)));
		for (Eigen::Index s = 0; s < panel.values.cols(); ++s) {
			std::ostringstream cell;
			cell.precision(12);
			cell << panel.values(i, s);
			row.push_back(cell.str());
		}
		table.rows.push_back(std::move(row));
	}
	writeCsv(path, table);
}

namespace {

double medianInPlace(std::vector<double>& v) {
	const std::size_t m = v.size();
	auto mid = v.begin() + static_cast<std::ptrdiff_t>(m / 2);
	std::nth_element(v.begin(), mid, v.end());
	if (m % 2 == 1) return *mid;
	const double hi = *mid;
	return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

Vector runningMedian(const Vector& y, int window) {
	const Eigen::Index t = y.size();
	const Eigen::Index halfMax = window / 2;
	Vector out(t);
	std::vector<double> buf;
	for (Eigen::Index i = 0; i < t; ++i) {
		const Eigen::Index half = std::min<Eigen::Index>({halfMax, i, t - 1 - i});
		buf.assign(y.data() + (i - half), y.data() + (i + half + 1));
		out[i] = medianInPlace(buf);
	}
	return out;
}

}  // namespace

std::pair<HourlyPanel, OutlierReport> adjustOutliers(const HourlyPanel& panel, int windowHours,
                                                     double thresholdMultiplier) {
	if (windowHours < 3 || windowHours % 2 == 0) {
		throw std::invalid_argument("adjustOutliers: window must be odd and >= 3");
	}
	if (!(thresholdMultiplier > 0.0)) {
		throw std::invalid_argument("adjustOutliers: threshold multiplier must be positive");
	}
	if (panel.values.rows() <= windowHours) {
		throw std::invalid_argument("adjustOutliers: series shorter than the median window");
	}

	HourlyPanel out = panel;
	OutlierReport report;
	const Eigen::Index t = panel.values.rows();
	for (Eigen::Index s = 0; s < panel.values.cols(); ++s) {
		const Vector y = panel.values.col(s);
		const Vector med = runningMedian(y, windowHours);

		// Baseline: least-squares fit of y on its running median.
		const double mBar = med.mean();
		const double yBar = y.mean();
		const double sxx = (med.array() - mBar).matrix().squaredNorm();
		double slope = 0.0;
		if (sxx > 0.0) {
			slope = (med.array() - mBar).matrix().dot((y.array() - yBar).matrix()) / sxx;
		}
		const double intercept = yBar - slope * mBar;
		Vector fit = intercept + slope * med.array();
		Vector resid = y - fit;

		std::vector<double> buf(resid.data(), resid.data() + t);
		const double center = medianInPlace(buf);
		for (Eigen::Index i = 0; i < t; ++i) buf[static_cast<std::size_t>(i)] = std::abs(resid[i] - center);
		const double mad = medianInPlace(buf);
		if (mad == 0.0) continue;  // constant / exactly-fit series: nothing to flag

		const double lambda = thresholdMultiplier * mad;
		for (Eigen::Index i = 0; i < t; ++i) {
			if (std::abs(resid[i]) > lambda) {
				OutlierFlag flag;
				flag.timestamp = panel.grid.at(i);
				flag.series = panel.seriesNames[static_cast<std::size_t>(s)];
				flag.original = y[i];
				flag.replacement = fit[i];
				out.values(i, s) = fit[i];
				report.flagged.push_back(std::move(flag));
			}
		}
	}
	return {std::move(out), std::move(report)};
}

void writeOutlierCsv(const std::string& path, const OutlierReport& report) {
	CsvTable table;
	table.header = {"timestamp", "series", "original", "replacement"};
	for (const OutlierFlag& f : report.flagged) {
		std::ostringstream a, b;
		a.precision(12);
		b.precision(12);
		a << f.original;
		b << f.replacement;
		table.rows.push_back({formatHourStamp(f.timestamp), f.series, a.str(), b.str()});
	}
	writeCsv(path, table);
}

}  // namespace mtload
