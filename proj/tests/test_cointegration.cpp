#include "mtload/cointegration.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mtload;

namespace {

// Two observed series sharing one stochastic trend: y1 = w + e1, y2 = w/2 + e2,
// so y1 - 2*y2 is stationary.
Matrix cointegratedPanel(Eigen::Index t, std::uint64_t seed, double noise = 0.3) {
	std::mt19937_64 gen(seed);
	std::normal_distribution<double> dist;
	Matrix panel(t, 2);
	double w = 0.0;
	for (Eigen::Index i = 0; i < t; ++i) {
		w += dist(gen);
		panel(i, 0) = w + noise * dist(gen);
		panel(i, 1) = 0.5 * w + noise * dist(gen);
	}
	return panel;
}

}  // namespace

TEST_CASE("the cointegrating direction is recovered within five degrees") {
	const Matrix panel = cointegratedPanel(2000, 42);
	const VecmModel model = fitVecm(panel, {1}, 1);
	REQUIRE(model.beta.rows() == 2);
	REQUIRE(model.beta.cols() == 1);
	Vector truth(2);
	truth << 1.0, -2.0;
	const double cosine = std::abs(model.beta.col(0).dot(truth)) /
	                      (model.beta.col(0).norm() * truth.norm());
	CHECK(cosine > std::cos(5.0 * M_PI / 180.0));
	// Normalization pins the first distinguishable element to one.
	CHECK(model.beta(0, 0) == doctest::Approx(1.0));
	// Eigenvalues are recorded in descending order.
	REQUIRE(model.eigenvalues.size() == 2);
	CHECK(model.eigenvalues[0] >= model.eigenvalues[1]);
}

TEST_CASE("full rank and zero rank are rejected") {
	const Matrix panel = cointegratedPanel(400, 7);
	CHECK_THROWS_AS(fitVecm(panel, {1}, 2), std::invalid_argument);
	CHECK_THROWS_AS(fitVecm(panel, {1}, 0), std::invalid_argument);
	// The default rank for n series is n - 1.
	const VecmModel model = fitVecm(panel, {1});
	CHECK(model.rank == 1);
}

TEST_CASE("error-correction forecast hand recursion") {
	VecmModel model;
	model.lags = {};
	model.rank = 1;
	model.alpha.resize(2, 1);
	model.alpha << -0.5, 0.0;
	model.beta.resize(2, 1);
	model.beta << 1.0, 0.0;  // Pi = diag(-0.5, 0)
	model.sigma = Matrix::Zero(2, 2);
	Matrix history(1, 2);
	history << 1.0, 1.0;
	const Matrix fc = vecmForecast(model, history, 3);
	CHECK(fc(0, 0) == doctest::Approx(0.5));
	CHECK(fc(0, 1) == doctest::Approx(1.0));
	CHECK(fc(1, 0) == doctest::Approx(0.25));
	CHECK(fc(1, 1) == doctest::Approx(1.0));
	CHECK(fc(2, 0) == doctest::Approx(0.125));
}

TEST_CASE("a zero adjustment matrix forecasts a constant path") {
	VecmModel model;
	model.lags = {};
	model.rank = 1;
	model.alpha = Matrix::Zero(2, 1);
	model.beta.resize(2, 1);
	model.beta << 1.0, -1.0;
	model.sigma = Matrix::Zero(2, 2);
	Matrix history(1, 2);
	history << 3.0, 7.0;
	const Matrix fc = vecmForecast(model, history, 5);
	for (int i = 0; i < 5; ++i) {
		CHECK(fc(i, 0) == doctest::Approx(3.0));
		CHECK(fc(i, 1) == doctest::Approx(7.0));
	}
}

TEST_CASE("forecast and simulation replay deterministically") {
	const Matrix panel = cointegratedPanel(800, 19);
	const VecmModel model = fitVecm(panel, {1}, 1);
	const Matrix a = vecmForecast(model, panel, 30);
	const Matrix b = vecmForecast(model, panel, 30);
	CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
	const TrajectoryEnsemble e1 = vecmSimulate(model, panel, 30, 5, 123);
	const TrajectoryEnsemble e2 = vecmSimulate(model, panel, 30, 5, 123);
	for (int s = 0; s < 5; ++s) {
		CHECK((e1.sims[s] - e2.sims[s]).cwiseAbs().maxCoeff() < 1e-9);
	}
}

TEST_CASE("zero covariance collapses the simulation onto the forecast") {
	const Matrix panel = cointegratedPanel(600, 23);
	VecmModel model = fitVecm(panel, {1}, 1);
	model.sigma.setZero();
	const Matrix fc = vecmForecast(model, panel, 40);
	const TrajectoryEnsemble ens = vecmSimulate(model, panel, 40, 3, 5);
	for (const Matrix& sim : ens.sims) {
		CHECK((sim - fc).cwiseAbs().maxCoeff() == 0.0);
	}
}

TEST_CASE("levels diffuse while the cointegrating combination stays put") {
	const Matrix panel = cointegratedPanel(1500, 29);
	const VecmModel model = fitVecm(panel, {1}, 1);
	const TrajectoryEnsemble ens = vecmSimulate(model, panel, 52, 300, 71);

	const auto varAt = [&](Eigen::Index step, int series) {
		double mean = 0.0;
		for (const Matrix& sim : ens.sims) mean += sim(step, series);
		mean /= static_cast<double>(ens.nSims());
		double var = 0.0;
		for (const Matrix& sim : ens.sims) {
			const double d = sim(step, series) - mean;
			var += d * d;
		}
		return var / static_cast<double>(ens.nSims() - 1);
	};
	// Random-walk-like levels: the spread of the fan grows with the horizon.
	CHECK(varAt(51, 0) / varAt(3, 0) > 4.0);

	// The combination beta' y mean-reverts: its lag-1 autocorrelation along
	// simulated paths stays clearly below a unit root.
	double num = 0.0, den = 0.0;
	for (const Matrix& sim : ens.sims) {
		Vector spread = sim * model.beta.col(0);
		spread.array() -= spread.mean();
		for (Eigen::Index i = 1; i < spread.size(); ++i) num += spread[i] * spread[i - 1];
		den += spread.squaredNorm();
	}
	CHECK(num / den < 1.0 - 1e-3);
}

TEST_CASE("short-run coefficients absorb lagged-difference dynamics") {
	// Add a strong transient: dy_t includes 0.4 * dy_{t-1} on the first series.
	std::mt19937_64 gen(31);
	std::normal_distribution<double> dist;
	const Eigen::Index t = 3000;
	Matrix panel(t, 2);
	double w = 0.0, dPrev = 0.0;
	panel.row(0).setZero();
	for (Eigen::Index i = 1; i < t; ++i) {
		const double shock = dist(gen);
		const double d = 0.4 * dPrev + shock;
		w += d;
		dPrev = d;
		panel(i, 0) = w + 0.1 * dist(gen);
		panel(i, 1) = 0.5 * w + 0.1 * dist(gen);
	}
	const VecmModel model = fitVecm(panel, {1}, 1);
	REQUIRE(model.gammas.size() == 1);
	// The common-trend persistence shows up in the lagged-difference block.
	CHECK(model.gammas[0].cwiseAbs().maxCoeff() > 0.1);
	CHECK(model.residuals.allFinite());
}
