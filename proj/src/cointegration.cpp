#include "mtload/cointegration.hpp"

#include "mtload/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtload {

namespace {

constexpr double kValueGuard = 1e12;

void guardFinite(double v, const char* what) {
	if (!std::isfinite(v) || std::abs(v) > kValueGuard) {
		throw std::runtime_error(std::string(what) + ": simulated value exceeded +/-1e12; unstable fit");
	}
}

// One step of the error-correction recursion given the level at t-1 and the
// lagged differences; returns the level at t.
Vector vecmStep(const VecmModel& model, const Vector& prevLevel,
                const std::function<Vector(int)>& lagDiff, const Vector& eps) {
	Vector dy = eps;
	if (model.rank > 0) dy += model.alpha * (model.beta.transpose() * prevLevel);
	for (std::size_t j = 0; j < model.lags.size(); ++j) {
		dy += model.gammas[j] * lagDiff(model.lags[j]);
	}
	return prevLevel + dy;
}

}  // namespace

VecmModel fitVecm(const Matrix& panel, const std::vector<int>& lags, int rank) {
	const Eigen::Index t = panel.rows();
	const Eigen::Index n = panel.cols();
	if (n < 1) throw std::invalid_argument("fitVecm: empty panel");
	if (rank == -1) rank = static_cast<int>(n) - 1;
	if (rank < 1 || rank >= n) {
		throw std::invalid_argument("fitVecm: rank must lie in [1, " + std::to_string(n) + ")");
	}
	const int maxLag = lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());
	const Eigen::Index rows = (t - 1) - maxLag;
	const Eigen::Index k2 = n * static_cast<Eigen::Index>(lags.size());
	if (rows <= n + k2) {
		throw std::invalid_argument("fitVecm: only " + std::to_string(rows) +
		                            " usable rows for " + std::to_string(n + k2) +
		                            " regressors per equation");
	}

	Matrix diff = panel.bottomRows(t - 1) - panel.topRows(t - 1);
	Matrix z0 = diff.bottomRows(rows);                     // dy_t
	Matrix z1 = panel.middleRows(maxLag, rows);            // y_{t-1}
	Matrix z2(rows, k2);
	for (std::size_t j = 0; j < lags.size(); ++j) {
		z2.middleCols(static_cast<Eigen::Index>(j) * n, n) = diff.middleRows(maxLag - lags[j], rows);
	}

	// Partial the lagged differences out of both dy_t and y_{t-1}.
	Matrix r0 = z0, r1 = z1;
	if (k2 > 0) {
		Eigen::ColPivHouseholderQR<Matrix> qr(z2);
		if (qr.rank() < k2) {
			throw std::runtime_error("fitVecm: rank-deficient lagged-difference block");
		}
		r0 -= z2 * qr.solve(z0);
		r1 -= z2 * qr.solve(z1);
	}
	const double nn = static_cast<double>(rows);
	Matrix s00 = r0.transpose() * r0 / nn;
	Matrix s11 = r1.transpose() * r1 / nn;
	Matrix s01 = r0.transpose() * r1 / nn;

	Matrix s00inv = s00.ldlt().solve(Matrix::Identity(n, n));
	Matrix a = s01.transpose() * s00inv * s01;
	a = 0.5 * (a + a.transpose());
	Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(a, s11);
	if (eig.info() != Eigen::Success) {
		throw std::runtime_error("fitVecm: generalized eigenproblem failed");
	}

	VecmModel model;
	model.lags = lags;
	model.rank = rank;
	// Eigen returns ascending order; record descending.
	for (Eigen::Index i = n - 1; i >= 0; --i) model.eigenvalues.push_back(eig.eigenvalues()[i]);

	model.beta.resize(n, rank);
	for (int r = 0; r < rank; ++r) {
		Vector v = eig.eigenvectors().col(n - 1 - r);
		// Normalize by the first element distinguishable from rounding noise.
		double pivot = 0.0;
		for (Eigen::Index i = 0; i < n && pivot == 0.0; ++i) {
			if (std::abs(v[i]) > 1e-12 * v.norm()) pivot = v[i];
		}
		if (pivot == 0.0) {
			throw std::runtime_error("fitVecm: degenerate cointegrating vector");
		}
		model.beta.col(r) = v / pivot;
	}
	Matrix bsb = model.beta.transpose() * s11 * model.beta;
	model.alpha = s01 * model.beta * bsb.ldlt().solve(Matrix::Identity(rank, rank));

	Matrix pi = model.alpha * model.beta.transpose();
	Matrix target = z0 - z1 * pi.transpose();
	if (k2 > 0) {
		Matrix g = Eigen::ColPivHouseholderQR<Matrix>(z2).solve(target);  // k2 x n
		for (std::size_t j = 0; j < lags.size(); ++j) {
			model.gammas.push_back(g.middleRows(static_cast<Eigen::Index>(j) * n, n).transpose());
		}
		model.residuals = target - z2 * g;
	} else {
		model.residuals = target;
	}
	model.sigma = estimateCovariance(model.residuals, "state").sigma;
	return model;
}

Matrix vecmForecast(const VecmModel& model, const Matrix& history, Eigen::Index h) {
	const Eigen::Index n = history.cols();
	const int maxLag = model.lags.empty() ? 0 : *std::max_element(model.lags.begin(), model.lags.end());
	if (history.rows() < maxLag + 1) {
		throw std::invalid_argument("vecmForecast: history shorter than the largest lag + 1");
	}
	Matrix out(h, n);
	const Eigen::Index hist = history.rows();
	auto levelAt = [&](Eigen::Index step) {  // step <= 0: history, >= 1: forecast
		return (step >= 1) ? Vector(out.row(step - 1).transpose())
		                   : Vector(history.row(hist + step - 1).transpose());
	};
	for (Eigen::Index step = 1; step <= h; ++step) {
		Vector level = vecmStep(
		    model, levelAt(step - 1),
		    [&](int k) { return Vector(levelAt(step - k) - levelAt(step - k - 1)); },
		    Vector::Zero(n));
		out.row(step - 1) = level;
		guardFinite(level.cwiseAbs().maxCoeff(), "vecmForecast");
	}
	return out;
}

TrajectoryEnsemble vecmSimulate(const VecmModel& model, const Matrix& history, Eigen::Index h,
                                Eigen::Index nSims, std::uint64_t seed) {
	const Eigen::Index n = history.cols();
	if (model.sigma.rows() != n) {
		throw std::invalid_argument("vecmSimulate: covariance dimension does not match series count");
	}
	const int maxLag = model.lags.empty() ? 0 : *std::max_element(model.lags.begin(), model.lags.end());
	if (history.rows() < maxLag + 1) {
		throw std::invalid_argument("vecmSimulate: history shorter than the largest lag + 1");
	}
	const Matrix l = psdFactor(model.sigma);
	const Eigen::Index hist = history.rows();
	TrajectoryEnsemble ens;
	ens.sims.reserve(nSims);
	for (Eigen::Index s = 0; s < nSims; ++s) {
		Matrix traj(h, n);
		auto levelAt = [&](Eigen::Index step) {
			return (step >= 1) ? Vector(traj.row(step - 1).transpose())
			                   : Vector(history.row(hist + step - 1).transpose());
		};
		for (Eigen::Index step = 1; step <= h; ++step) {
			Vector level = vecmStep(
			    model, levelAt(step - 1),
			    [&](int k) { return Vector(levelAt(step - k) - levelAt(step - k - 1)); },
			    l * rng::normalVector(seed, static_cast<std::uint64_t>(s),
			                          static_cast<std::uint64_t>(step), n));
			traj.row(step - 1) = level;
			guardFinite(level.cwiseAbs().maxCoeff(), "vecmSimulate");
		}
		ens.sims.push_back(std::move(traj));
	}
	return ens;
}

}  // namespace mtload
