#pragma once

#include "mtload/autoreg.hpp"
#include "mtload/ensemble.hpp"
#include "mtload/linalg.hpp"

#include <cstdint>
#include <vector>

namespace mtload {

// Error-correction form on a fixed difference-lag set:
//   dy_t = Pi y_{t-1} + sum_{k in lags} Gamma_k dy_{t-k} + eps_t,
// with Pi = alpha beta' of reduced rank r.
struct VecmModel {
	std::vector<int> lags;        // lags of the differenced terms
	int rank = 0;
	Matrix alpha;                 // series x r loadings
	Matrix beta;                  // series x r cointegrating vectors
	std::vector<Matrix> gammas;   // per lag, series x series
	Matrix sigma;
	Matrix residuals;
	std::vector<double> eigenvalues;  // full spectrum of the reduced-rank problem
};

// Reduced-rank regression (Johansen): partial out the lagged differences,
// solve the generalized eigenproblem, keep the top-r directions. Each
// cointegrating vector is normalized so its first element equals one.
// rank = -1 selects the default n - 1.
VecmModel fitVecm(const Matrix& panel, const std::vector<int>& lags, int rank = -1);

Matrix vecmForecast(const VecmModel& model, const Matrix& history, Eigen::Index h);

TrajectoryEnsemble vecmSimulate(const VecmModel& model, const Matrix& history, Eigen::Index h,
                                Eigen::Index nSims, std::uint64_t seed);

}  // namespace mtload
