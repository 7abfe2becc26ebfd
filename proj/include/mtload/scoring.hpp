#pragma once

#include "mtload/ensemble.hpp"
#include "mtload/linalg.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mtload {

// Asymmetric absolute loss for a single quantile forecast.
double pinballLoss(double q, double predicted, double actual);

// Empirical-CDF CRPS estimator:
//   (1/m) sum |x_i - y| - (1/(2 m^2)) sum_ij |x_i - x_j|,
// the double sum evaluated in O(m log m) from the sorted samples.
double crpsEnsemble(std::vector<double> samples, double actual);

// Mean scores per series, with optional per-group breakdown. Groups are keyed
// by an arbitrary label derived from the horizon step.
struct ScoreReport {
	std::vector<std::string> seriesNames;
	Vector meanCrps;                              // per series, over the horizon
	std::vector<double> probabilities;
	Matrix meanPinball;                           // probability x series
	// group label -> per-series mean CRPS over the cells in that group
	std::map<std::string, Vector> groupCrps;
	std::map<std::string, long> groupCounts;
};

using GroupKey = std::function<std::string(Eigen::Index step)>;

ScoreReport scoreEnsemble(const TrajectoryEnsemble& ens, const QuantileGrid& grid,
                          const Matrix& actuals, const GroupKey& grouping = nullptr);

// Empirical frequency of {actual <= forecast quantile} per probability and
// group cell.
struct CoverageTable {
	std::vector<double> probabilities;
	std::vector<std::string> groups;
	Matrix frequency;                             // probability x group
	std::vector<long> cellCounts;                 // per group
};

CoverageTable coverageTable(const QuantileGrid& grid, const Matrix& actuals,
                            const GroupKey& grouping);

// Horizon-step group keys used by the rolling study reports.
GroupKey groupByHourOfDay(HourStamp origin);
GroupKey groupByEdgeWeeks(Eigen::Index horizon);   // first / last two weeks, else ""

// CSV: model,series,group,metric,value (one row per scored cell).
void writeScoreCsv(const std::string& path, const std::string& model, const ScoreReport& report);
void writeCoverageCsv(const std::string& path, const std::string& model,
                      const CoverageTable& table);

}  // namespace mtload
