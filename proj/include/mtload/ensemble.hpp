#pragma once

#include "mtload/linalg.hpp"
#include "mtload/timebase.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mtload {

// Residual covariance per Sigma = 1/(T-1) * sum eps_i eps_i^T (zero mean,
// no mean subtraction).
struct ErrorCovariance {
	Matrix sigma;
	double jitterApplied = 0.0;
	std::string source;
};

ErrorCovariance estimateCovariance(const Matrix& residuals, const std::string& source = "");

// Optional diagonal shrinkage toward the residual variances:
// (1-w) * Sigma + w * diag(Sigma).
ErrorCovariance shrinkDiagonal(const ErrorCovariance& cov, double weight);

// Lower-triangular factor with the jitter escalation policy; an exactly zero
// matrix factors to zero so degenerate noise stays degenerate.
Matrix psdFactor(const Matrix& sigma, double* jitterApplied = nullptr);

// n_sims x horizon x series tensor of sampled future paths, stored as one
// (horizon x series) matrix per simulation.
struct TrajectoryEnsemble {
	std::vector<Matrix> sims;
	HourStamp origin = 0;
	std::vector<std::string> seriesNames;

	Eigen::Index nSims() const { return static_cast<Eigen::Index>(sims.size()); }
	Eigen::Index horizon() const { return sims.empty() ? 0 : sims.front().rows(); }
	Eigen::Index nSeries() const { return sims.empty() ? 0 : sims.front().cols(); }
};

// i.i.d. N(0, Sigma) rows; draw (sim, step) depends only on (seed, sim, step).
std::vector<Matrix> sampleErrors(const ErrorCovariance& cov, Eigen::Index steps,
                                 Eigen::Index nSims, std::uint64_t seed);

struct QuantileGrid {
	std::vector<double> probabilities;       // sorted, in (0,1)
	std::vector<Matrix> values;              // per probability: horizon x series
	HourStamp origin = 0;
	std::vector<std::string> seriesNames;
};

// Empirical quantiles per (horizon, series) cell; linear interpolation between
// order statistics at index (m-1)p + 1 (the type-7 convention).
QuantileGrid ensembleQuantiles(const TrajectoryEnsemble& ens,
                               const std::vector<double>& probabilities);

double quantileType7(std::vector<double> values, double p);

// CSV: series,horizon_index,timestamp,sim_or_prob,value
void writeEnsembleCsv(const std::string& path, const TrajectoryEnsemble& ens);
void writeQuantileCsv(const std::string& path, const QuantileGrid& grid);
TrajectoryEnsemble readEnsembleCsv(const std::string& path);

}  // namespace mtload
