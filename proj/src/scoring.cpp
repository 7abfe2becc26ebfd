#include "mtload/scoring.hpp"

#include "mtload/csv.hpp"
#include "mtload/timebase.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtload {

double pinballLoss(double q, double predicted, double actual) {
	if (!(q > 0.0 && q < 1.0)) {
		throw std::invalid_argument("pinballLoss: probability must lie in (0, 1)");
	}
	return (actual >= predicted) ? q * (actual - predicted) : (1.0 - q) * (predicted - actual);
}

double crpsEnsemble(std::vector<double> samples, double actual) {
	if (samples.empty()) throw std::invalid_argument("crpsEnsemble: empty sample set");
	for (double s : samples) {
		if (!std::isfinite(s)) throw std::invalid_argument("crpsEnsemble: non-finite sample");
	}
	const double m = static_cast<double>(samples.size());
	double absTerm = 0.0;
	for (double s : samples) absTerm += std::abs(s - actual);
	absTerm /= m;

	std::sort(samples.begin(), samples.end());
	// sum_{i,j} |x_i - x_j| = 2 * sum_i (2i - m - 1) x_(i), i 1-based ascending.
	double spread = 0.0;
	for (std::size_t i = 0; i < samples.size(); ++i) {
		spread += (2.0 * static_cast<double>(i + 1) - m - 1.0) * samples[i];
	}
	return absTerm - spread / (m * m);
}

ScoreReport scoreEnsemble(const TrajectoryEnsemble& ens, const QuantileGrid& grid,
                          const Matrix& actuals, const GroupKey& grouping) {
	const Eigen::Index h = ens.horizon();
	const Eigen::Index n = ens.nSeries();
	if (actuals.rows() != h || actuals.cols() != n) {
		throw std::invalid_argument("scoreEnsemble: actuals shape does not match the ensemble");
	}
	ScoreReport report;
	report.seriesNames = ens.seriesNames;
	report.probabilities = grid.probabilities;
	report.meanCrps = Vector::Zero(n);
	report.meanPinball = Matrix::Zero(static_cast<Eigen::Index>(grid.probabilities.size()), n);

	std::vector<double> cell(static_cast<std::size_t>(ens.nSims()));
	std::map<std::string, Vector> groupSum;
	std::map<std::string, long> groupCount;
	for (Eigen::Index step = 0; step < h; ++step) {
		const std::string key = grouping ? grouping(step) : std::string();
		for (Eigen::Index series = 0; series < n; ++series) {
			for (Eigen::Index s = 0; s < ens.nSims(); ++s) {
				cell[static_cast<std::size_t>(s)] = ens.sims[static_cast<std::size_t>(s)](step, series);
			}
			const double crps = crpsEnsemble(cell, actuals(step, series));
			report.meanCrps[series] += crps;
			if (grouping) {
				auto it = groupSum.find(key);
				if (it == groupSum.end()) it = groupSum.emplace(key, Vector::Zero(n)).first;
				it->second[series] += crps;
			}
			for (std::size_t p = 0; p < grid.probabilities.size(); ++p) {
				report.meanPinball(static_cast<Eigen::Index>(p), series) +=
				    pinballLoss(grid.probabilities[p],
				                grid.values[p](step, series), actuals(step, series));
			}
		}
		if (grouping) groupCount[key] += 1;
	}
	report.meanCrps /= static_cast<double>(h);
	report.meanPinball /= static_cast<double>(h);
	for (auto& [key, sum] : groupSum) {
		report.groupCrps[key] = sum / static_cast<double>(groupCount[key]);
		report.groupCounts[key] = groupCount[key];
	}
	return report;
}

CoverageTable coverageTable(const QuantileGrid& grid, const Matrix& actuals,
                            const GroupKey& grouping) {
	if (grid.values.empty()) throw std::invalid_argument("coverageTable: empty quantile grid");
	const Eigen::Index h = grid.values.front().rows();
	const Eigen::Index n = grid.values.front().cols();
	if (actuals.rows() != h || actuals.cols() != n) {
		throw std::invalid_argument("coverageTable: actuals shape does not match the grid");
	}
	CoverageTable table;
	table.probabilities = grid.probabilities;

	std::map<std::string, Eigen::Index> groupIndex;
	std::vector<std::string> keys(static_cast<std::size_t>(h));
	for (Eigen::Index step = 0; step < h; ++step) {
		keys[static_cast<std::size_t>(step)] = grouping ? grouping(step) : std::string();
		if (groupIndex.emplace(keys[static_cast<std::size_t>(step)],
		                       static_cast<Eigen::Index>(groupIndex.size())).second) {
			table.groups.push_back(keys[static_cast<std::size_t>(step)]);
		}
	}
	// std::map iterates sorted; rebuild the index from the sorted labels.
	std::sort(table.groups.begin(), table.groups.end());
	groupIndex.clear();
	for (std::size_t g = 0; g < table.groups.size(); ++g) {
		groupIndex[table.groups[g]] = static_cast<Eigen::Index>(g);
	}

	const Eigen::Index np = static_cast<Eigen::Index>(grid.probabilities.size());
	const Eigen::Index ng = static_cast<Eigen::Index>(table.groups.size());
	Matrix hits = Matrix::Zero(np, ng);
	table.cellCounts.assign(static_cast<std::size_t>(ng), 0);
	for (Eigen::Index step = 0; step < h; ++step) {
		const Eigen::Index g = groupIndex[keys[static_cast<std::size_t>(step)]];
		table.cellCounts[static_cast<std::size_t>(g)] += n;
		for (Eigen::Index p = 0; p < np; ++p) {
			for (Eigen::Index series = 0; series < n; ++series) {
				if (actuals(step, series) <= grid.values[static_cast<std::size_t>(p)](step, series)) {
					hits(p, g) += 1.0;
				}
			}
		}
	}
	table.frequency = hits;
	for (Eigen::Index g = 0; g < ng; ++g) {
		if (table.cellCounts[static_cast<std::size_t>(g)] > 0) {
			table.frequency.col(g) /= static_cast<double>(table.cellCounts[static_cast<std::size_t>(g)]);
		}
	}
	return table;
}

GroupKey groupByHourOfDay(HourStamp origin) {
	return [origin](Eigen::Index step) {
		const int hour = toCivil(origin + 1 + static_cast<HourStamp>(step)).hour;
		char buf[16];
		std::snprintf(buf, sizeof(buf), "hour_%02d", hour);
		return std::string(buf);
	};
}

GroupKey groupByEdgeWeeks(Eigen::Index horizon) {
	return [horizon](Eigen::Index step) -> std::string {
		if (step < 2 * 168) return "first_two_weeks";
		if (step >= horizon - 2 * 168) return "last_two_weeks";
		return "";
	};
}

void writeScoreCsv(const std::string& path, const std::string& model, const ScoreReport& report) {
	std::ofstream out(path);
	if (!out) throw std::runtime_error("writeScoreCsv: cannot open " + path);
	out << "model,series,group,metric,value\n";
	const Eigen::Index n = report.meanCrps.size();
	auto name = [&](Eigen::Index i) {
		return i < static_cast<Eigen::Index>(report.seriesNames.size())
		           ? report.seriesNames[static_cast<std::size_t>(i)]
		           : "series_" + std::to_string(i);
	};
	for (Eigen::Index i = 0; i < n; ++i) {
		out << model << ',' << name(i) << ",,crps," << report.meanCrps[i] << '\n';
	}
	for (std::size_t p = 0; p < report.probabilities.size(); ++p) {
		for (Eigen::Index i = 0; i < n; ++i) {
			out << model << ',' << name(i) << ",,pinball_" << report.probabilities[p] << ','
			    << report.meanPinball(static_cast<Eigen::Index>(p), i) << '\n';
		}
	}
	for (const auto& [key, crps] : report.groupCrps) {
		for (Eigen::Index i = 0; i < n; ++i) {
			out << model << ',' << name(i) << ',' << key << ",crps," << crps[i] << '\n';
		}
	}
}

void writeCoverageCsv(const std::string& path, const std::string& model,
                      const CoverageTable& table) {
	std::ofstream out(path);
	if (!out) throw std::runtime_error("writeCoverageCsv: cannot open " + path);
	out << "model,group,probability,frequency,cells\n";
	for (std::size_t g = 0; g < table.groups.size(); ++g) {
		for (std::size_t p = 0; p < table.probabilities.size(); ++p) {
			out << model << ',' << table.groups[g] << ',' << table.probabilities[p] << ','
			    << table.frequency(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(g)) << ','
			    << table.cellCounts[g] << '\n';
		}
	}
}

}  // namespace mtload
