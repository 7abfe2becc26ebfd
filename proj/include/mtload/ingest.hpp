#pragma once

#include "mtload/linalg.hpp"
#include "mtload/timebase.hpp"

#include <map>
#include <string>
#include <vector>

namespace mtload {

// Hourly multi-series panel aligned to a contiguous grid. After ingestion all
// cells hold finite values; gaps have been interpolated or the file rejected.
struct HourlyPanel {
	TimeGrid grid;
	std::vector<std::string> seriesNames;
	Matrix values;  // hours x series

	Eigen::Index seriesIndex(const std::string& name) const;
};

// CSV with header `timestamp,<series...>`, ISO-8601 hour timestamps. Duplicate
// timestamps (DST fold) are averaged, at most two per hour. Gaps of up to six
// consecutive hours are filled by linear interpolation; longer gaps or missing
// edges reject the file. columnGroups optionally averages several input
// columns into one output series (e.g. multi-station temperatures); when empty
// every input column becomes its own series.
HourlyPanel readPanelCsv(const std::string& path,
                         const std::map<std::string, std::vector<std::string>>& columnGroups = {});

void writePanelCsv(const std::string& path, const HourlyPanel& panel);

struct OutlierFlag {
	HourStamp timestamp = 0;
	std::string series;
	double original = 0.0;
	double replacement = 0.0;
};

struct OutlierReport {
	std::vector<OutlierFlag> flagged;
};

// Single-observation outlier repair, per series: centered running median
// (window shrinks symmetrically at the edges), least-squares baseline of the
// series on its running median, and soft-thresholding of the residuals at
// thresholdMultiplier * MAD. Points with a nonzero thresholded dummy are
// replaced by the fitted baseline.
std::pair<HourlyPanel, OutlierReport> adjustOutliers(const HourlyPanel& panel,
                                                     int windowHours = 169,
                                                     double thresholdMultiplier = 8.0);

void writeOutlierCsv(const std::string& path, const OutlierReport& report);

}  // namespace mtload
