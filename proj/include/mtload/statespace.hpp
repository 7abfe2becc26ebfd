#pragma once

#include "mtload/ensemble.hpp"
#include "mtload/linalg.hpp"

#include <cstdint>
#include <optional>

namespace mtload {

// Level-only exponential smoothing: l_t = l_{t-1} + alpha * (y_t - l_{t-1}).
// Used with fixed alpha to split temperature into smooth and residual parts.
struct VetsLevelModel {
	double alpha = 0.0;
	double initialLevel = 0.0;
	Vector levels;      // l_1 .. l_T
	Vector residuals;   // y_t - l_{t-1}

	double finalLevel() const { return levels.size() ? levels[levels.size() - 1] : initialLevel; }
};

// l_0 defaults to the mean of the first 24 observations (or all, if fewer).
VetsLevelModel etsLevelSmooth(const Vector& y, double alpha,
                              std::optional<double> initialLevel = std::nullopt);

// Deterministic forecast: constant at l_T.
Vector etsLevelForecast(const VetsLevelModel& model, Eigen::Index h);

// Additive level + seasonal state model with smoothing parameters shared
// across series:
//   y_t = l_{t-1} + s_{t-m} + eps_t,  l_t = l_{t-1} + alpha eps_t,
//   s_t = s_{t-m} + gamma eps_t.
struct VetsModel {
	double alpha = 0.0;
	double gamma = 0.0;
	int period = 0;               // m
	Vector initialLevel;          // per series
	Matrix initialSeasonal;       // m x series, sums to zero per series
	Matrix levels;                // T x series fitted level path
	Matrix seasonal;              // T x series fitted seasonal states
	Matrix residuals;             // T x series
	Matrix sigma;                 // error covariance

	Eigen::Index nSeries() const { return levels.cols(); }
	Vector finalLevel() const { return levels.row(levels.rows() - 1).transpose(); }
	// Last fitted seasonal state whose phase matches forecast step h (1-based).
	Vector seasonalAt(Eigen::Index h) const;
};

// (alpha, gamma) minimize trace of the residual covariance over (0.001, 0.999)^2
// by a 20x20 grid refined with golden-section search per axis.
VetsModel fitVets(const Matrix& panel, int period);

// Evaluates the fitted recursion and trace objective at given parameters.
VetsModel evaluateVets(const Matrix& panel, int period, double alpha, double gamma);

Matrix vetsForecast(const VetsModel& model, Eigen::Index h);

struct VetsSimulation {
	TrajectoryEnsemble observations;
	TrajectoryEnsemble levels;   // per-trajectory level path, for level extraction
};

VetsSimulation vetsSimulate(const VetsModel& model, Eigen::Index h, const Matrix& sigma,
                            Eigen::Index nSims, std::uint64_t seed);

}  // namespace mtload
