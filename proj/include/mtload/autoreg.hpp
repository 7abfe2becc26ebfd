#pragma once

#include "mtload/ensemble.hpp"
#include "mtload/linalg.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace mtload {

// Multivariate autoregression on a fixed lag set, zero intercept:
//   y_t = sum_{k in lags} phi_k y_{t-k} + eps_t.
struct VarModel {
	std::vector<int> lags;
	std::vector<Matrix> coefs;    // per lag, series x series
	Matrix sigma;
	Matrix residuals;
};

// Per-equation least squares (Gaussian ML with unrestricted covariance).
VarModel fitVar(const Matrix& panel, const std::vector<int>& lags);

Matrix varForecast(const VarModel& model, const Matrix& history, Eigen::Index h);

TrajectoryEnsemble varSimulate(const VarModel& model, const Matrix& history, Eigen::Index h,
                               Eigen::Index nSims, std::uint64_t seed);

// Sparse univariate autoregression: lags chosen by a Lasso path, coefficients
// by an OLS refit on the selected support.
struct PostLassoArModel {
	int pMax = 0;
	std::vector<int> lags;     // selected, sorted ascending
	Vector coefs;              // one per selected lag
	double sigma2 = 0.0;       // refit residual variance
};

struct PostLassoDiagnostics {
	double lambdaMax = 0.0;
	std::vector<std::vector<int>> pathSupports;  // support at each path point
	double lassoRss = 0.0;                       // at the selected path point
	double refitRss = 0.0;
};

// Coordinate-descent Lasso (no intercept, unit-variance-scaled lag columns)
// along a 50-point geometric path from lambda_max down to 1e-3 * lambda_max;
// the support minimizing BIC = n log(RSS/n) + |S| log(n) with an OLS refit
// per support wins.
PostLassoArModel fitPostLassoAr(const Vector& y, int pMax,
                                PostLassoDiagnostics* diagnostics = nullptr);

double postLassoPredict(const PostLassoArModel& model,
                        const std::function<double(int)>& lagValue);

// Joint iterative simulation of one sparse AR per series with cross-series
// Gaussian innovations. Lags reaching back past the forecast origin read the
// realized history; later lags read the trajectory's own simulated values.
TrajectoryEnsemble arSimulate(const std::vector<PostLassoArModel>& models, const Matrix& history,
                              Eigen::Index h, const Matrix& sigma, Eigen::Index nSims,
                              std::uint64_t seed);

}  // namespace mtload
